from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smoothfix import fleet
from smoothfix.diagnostics import (LatticeError, appr_W_trace, d_alpha_curve, epsilon_limit, nerman_ratio,
                                   regvar_curve)
from smoothfix.martingales import EmpiricalW
from smoothfix.solutions import PeriodicH, SolutionSpec
from smoothfix.tree import first_exit_front, generation_front

from conftest import STRADDLE_ALPHA


def gamma_lt(t):
    # Laplace transform of Gamma(2, 1/2), the uniform-pair limit
    return (1 + np.asarray(t) / 2) ** -2


def test_regvar_gamma_laplace():
    for u in (0.5, 0.8):
        c = regvar_curve(gamma_lt, 1.0, u, [1e-4, 1e-3])
        assert c.max_error <= 1e-3


def test_regvar_unit_u_is_one():
    c = regvar_curve(gamma_lt, 1.0, 1.0, [1e-3, 1.0])
    assert np.all(c.ratio == 1.0)


def test_regvar_drops_flat_points():
    c = regvar_curve(lambda t: np.ones_like(np.asarray(t)), 1.0, 0.5, [1e-3])
    assert c.dropped[0] and math.isnan(c.max_error)


def test_regvar_lattice_checks():
    f = lambda t: np.exp(-np.asarray(t))  # noqa: E731
    with pytest.raises(LatticeError):
        regvar_curve(f, 1.0, 0.5, [1e-3], lattice_span=3.0)
    with pytest.raises(LatticeError):
        regvar_curve(f, 1.0, 1 / 3, [1e-3, 2e-3], lattice_span=3.0)
    c = regvar_curve(f, 1.0, 1 / 3, [1e-3, 1e-3 / 9], lattice_span=3.0)
    assert c.max_error <= 1e-3


@given(st.floats(0.1, 10.0), st.floats(0.3, 2.0))
def test_d_alpha_of_stable_transform(c, alpha):
    f = lambda t: np.exp(-c * np.asarray(t) ** alpha)  # noqa: E731
    # D tends to c as c t^alpha -> 0
    t0 = (1e-6 / c) ** (1 / alpha)
    curve = d_alpha_curve(f, alpha, [t0, 10 * t0])
    assert np.allclose(curve.D, c, rtol=1e-4)
    assert curve.score <= 1e-4


def test_d_alpha_with_periodic_h():
    h = PeriodicH.from_function(3.0, lambda x: 1 + 0.1 * np.sin(2 * np.pi * x), 1.0)
    sol = SolutionSpec(1.0, h, EmpiricalW.constant(1.0))
    raw = d_alpha_curve(sol, 1.0, [1e-3])
    divided = d_alpha_curve(sol, 1.0, [1e-3], h=h)
    assert raw.score > 0.05
    assert divided.score <= 1e-3


def test_nerman_binary_half(rng):
    f = first_exit_front(fleet.binary_half(), 0.5 * math.log(2), rng)
    over = 0.5 * math.log(2)
    assert nerman_ratio(f, 1.0, 1.0, over - 0.01) == pytest.approx(1.0)
    assert nerman_ratio(f, 1.0, 1.0, over + 0.01) == 0.0
    assert nerman_ratio(f, 1.0, 0.0, 0.0) == pytest.approx(math.exp(over))


def test_nerman_needs_first_exit(rng):
    with pytest.raises(ValueError):
        nerman_ratio(generation_front(fleet.binary_half(), 1, rng), 1.0, 1.0, 0.0)


@given(st.integers(0, 2**32), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_nerman_non_increasing_in_c(seed, c1, c2):
    f = first_exit_front(fleet.uniform_pair(), 2.0, np.random.default_rng(seed))
    lo, hi = sorted((c1, c2))
    assert nerman_ratio(f, 1.0, 1.0, hi) <= nerman_ratio(f, 1.0, 1.0, lo)


def test_epsilon_uniform_pair():
    # the tilted step law is exponential with rate 2
    for c in (0.0, 0.5, 1.0):
        assert epsilon_limit(fleet.uniform_pair(), 1.0, c, budget=400_000, seed=1) == pytest.approx(
            math.exp(-2 * c), rel=0.03)


def test_epsilon_finite_model():
    assert epsilon_limit(fleet.binary_half(), 1.0, 0.0) == 1.0
    assert epsilon_limit(fleet.binary_half(), 1.0, math.log(2)) == 0.0
    assert 0 < epsilon_limit(fleet.straddle_mixture(), STRADDLE_ALPHA, 0.5) < 1


def test_nerman_large_t_approaches_epsilon():
    f = first_exit_front(fleet.uniform_pair(), 6.0, np.random.default_rng(2), n_trees=400, track_paths=False)
    r = nerman_ratio(f, 1.0, 1.0, 0.5)
    assert abs(r.mean() - math.exp(-1.0)) <= 4 * r.std(ddof=1) / math.sqrt(r.size)


def test_appr_binary_half_closed_form():
    sol = SolutionSpec(1.0, PeriodicH.constant(1.0), EmpiricalW.constant(1.0))
    t = np.array([0.0, 1.0, 3.0])
    tr = appr_W_trace(fleet.binary_half(), sol, t, reps=4, seed=0)
    expected = np.exp(t) * (1 - np.exp(-np.exp(-t))) - 1
    assert np.allclose(tr.gaps, expected[None, :], atol=1e-12)
    assert np.allclose(tr.proxy, 1.0)


def test_appr_requires_constant_h():
    h = PeriodicH.from_function(3.0, lambda x: 1 + 0.1 * np.sin(2 * np.pi * x), 1.0)
    sol = SolutionSpec(1.0, h, EmpiricalW.constant(1.0))
    with pytest.raises(ValueError):
        appr_W_trace(fleet.ternary_third(), sol, [0.0, 1.0])


def test_appr_uniform_pair_shrinks(uniform_w):
    sol = SolutionSpec(1.0, PeriodicH.constant(1.0), uniform_w)
    tr = appr_W_trace(fleet.uniform_pair(), sol, [0.0, 2.0, 4.0, 6.0], reps=300, seed=3)
    assert tr.shrink_z(0, 3) > 4
    assert tr.mean_abs_gap[-1] < 0.1
