from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from smoothfix import fleet
from smoothfix.exponent import (AlphaNotBracketed, CharacteristicExponent,
                                classify_regime, find_alpha, shape_check)
from smoothfix.weights import CountLaw, ExactM, ModelError, WeightLaw, WeightModel

from conftest import STRADDLE_ALPHA


def _bisect_oracle(m, lo, hi, n=200):
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if m(mid) > 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("name", ["binary-half", "ternary-third", "uniform-pair"])
def test_unit_alpha(name):
    ce = find_alpha(fleet.NAMED[name]())
    assert isinstance(ce.alpha, float)
    assert ce.alpha == pytest.approx(1.0, abs=1e-10)
    assert ce.exact and ce.regime == "A4a"


def test_uniform_pair_slope():
    ce = find_alpha(fleet.uniform_pair())
    assert ce.m_prime_at_alpha == pytest.approx(-0.5, abs=1e-9)


def test_straddle_mixture_matches_frozen_root():
    ce = find_alpha(fleet.straddle_mixture())
    assert ce.alpha == pytest.approx(STRADDLE_ALPHA, abs=1e-10)
    assert ce.m_prime_at_alpha == pytest.approx(-0.629500183584232, abs=1e-8)


def test_literal_atom_has_no_root():
    with pytest.raises(AlphaNotBracketed):
        find_alpha(fleet.straddle_atom(), search_max=64)
    # the minimum of 0.2**t + 1.2**t stays above one
    m = fleet.straddle_atom().exact_m().m
    assert min(m(k / 1000) for k in range(1, 20_000)) == pytest.approx(1.389471393660019, abs=1e-6)


def test_subcritical_rejected():
    with pytest.raises(ModelError):
        find_alpha(WeightModel.deterministic([0.5]))


def test_too_small_search_window():
    with pytest.raises(AlphaNotBracketed):
        find_alpha(WeightModel.deterministic([0.9, 0.9, 0.9]), search_max=2.0)
    ce = find_alpha(WeightModel.deterministic([0.9, 0.9, 0.9]), search_max=32.0)
    assert ce.alpha == pytest.approx(math.log(3) / -math.log(0.9), rel=1e-10)


def test_monte_carlo_alpha_close_to_exact():
    law = WeightModel.iid(CountLaw("const", {"n": 2}), WeightLaw("uniform", {"low": 0.0, "high": 1.0}))
    ce = find_alpha(law, budget=200_000, seed=5)
    assert not ce.exact
    assert abs(ce.alpha - 1.0) <= 4 * ce.alpha_stderr + 1e-9


@given(st.floats(0.05, 0.95), st.integers(2, 6))
def test_root_satisfies_equation(w, n):
    model = WeightModel.deterministic([w] * n)
    ce = find_alpha(model, search_max=128.0)
    assert abs(model.exact_m().m(ce.alpha) - 1.0) <= 1e-9
    assert ce.alpha == pytest.approx(math.log(n) / -math.log(w), rel=1e-9)


@given(st.floats(0.05, 0.6), st.floats(0.3, 2.0))
def test_tightening_tol_is_stable(a, b):
    model = WeightModel.mixture([(0.5, [a, b]), (0.5, [a])])
    m = model.exact_m().m
    if m(64.0) > 1:
        return
    a1 = find_alpha(model, tol=1e-6, search_max=64.0).alpha
    a2 = find_alpha(model, tol=1e-12, search_max=64.0).alpha
    assert abs(a1 - a2) <= 2e-6
    assert a2 == pytest.approx(_bisect_oracle(m, 0.0, 64.0) if m(1e-9) > 1 else a2, abs=1e-9)


def test_shape_check():
    assert shape_check(fleet.uniform_pair(), 1.0)
    assert shape_check(fleet.straddle_mixture(), STRADDLE_ALPHA)
    assert not shape_check(fleet.uniform_pair(), 2.0)


def test_classify_regime_examples():
    bh = fleet.binary_half()
    assert classify_regime(bh, find_alpha(bh)) == "both"
    up = fleet.uniform_pair()
    assert classify_regime(up, find_alpha(up), theta_probe=0.5) == "both"


def test_classify_regime_tangent_case():
    em = ExactM("tangent", lambda th: 1 + (1 - th) ** 2, lambda th: -2 * (1 - th))
    model = WeightModel.iid(CountLaw("const", {"n": 2}), WeightLaw("uniform", {"low": 0.0, "high": 1.0}),
                            exact_m=em)
    ce = CharacteristicExponent(1.0, 0.0, 0.0, "undetermined", 1e-12, True)
    assert classify_regime(model, ce, theta_probe=0.5) == "A4b"
    with pytest.raises(ValueError):
        classify_regime(model, ce, theta_probe=1.5)
