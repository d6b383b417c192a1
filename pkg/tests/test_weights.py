from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smoothfix import fleet
from smoothfix.weights import (CountLaw, ExactM, ModelError, WeightLaw, WeightModel, check_assumptions,
                               m_eval, m_prime_eval, sample)


def test_deterministic_sample_is_fixed(rng):
    model = fleet.binary_half()
    for _ in range(5):
        assert sample(model, rng).tolist() == [0.5, 0.5]


def test_single_atom_mixture_sample(rng):
    model = fleet.straddle_atom()
    for _ in range(5):
        assert sample(model, rng).tolist() == [0.2, 1.2]


def test_uniform_pair_has_two_children(rng):
    counts, w = fleet.uniform_pair().sample_many(1000, rng)
    assert np.all(counts == 2)
    assert np.all((w > 0) & (w <= 1))


def test_zero_weights_are_dropped(rng):
    model = WeightModel.mixture([(0.5, [0.0, 0.4]), (0.5, [0.0])])
    counts, w = model.sample_many(200, rng)
    assert set(counts.tolist()) <= {0, 1}
    assert np.all(w == 0.4)


def test_nonpositive_sampler_rejected(rng):
    bad = WeightLaw("custom", sampler=lambda n, g: np.zeros(n))
    model = WeightModel.iid(CountLaw("const", {"n": 2}), bad)
    with pytest.raises(ModelError):
        model.sample(rng)


def test_mixture_probabilities_must_sum_to_one():
    with pytest.raises(ModelError):
        WeightModel.mixture([(0.5, [0.5]), (0.4, [0.25])])


def test_lattice_declaration_checked():
    with pytest.raises(ModelError):
        WeightModel.deterministic([0.5, 0.3], lattice_span=2.0)
    WeightModel.deterministic([0.5, 0.25], lattice_span=2.0)


def test_m_examples():
    assert m_eval(fleet.binary_half(), 1.0).value == 1.0
    assert m_eval(fleet.uniform_pair(), 1.0).value == 1.0
    assert m_eval(fleet.uniform_pair(), 3.0).value == pytest.approx(0.5, abs=1e-15)
    assert m_eval(fleet.ternary_third(), 2.0).value == pytest.approx(1 / 3, abs=1e-15)
    assert m_eval(fleet.binary_half(), 1.0).exact


def test_m_prime_examples():
    assert m_prime_eval(fleet.binary_half(), 1.0).value == pytest.approx(math.log(0.5), abs=1e-15)
    assert m_prime_eval(fleet.uniform_pair(), 1.0).value == pytest.approx(-0.5, abs=1e-15)
    assert m_prime_eval(fleet.ternary_third(), 1.0).value == pytest.approx(-math.log(3), abs=1e-15)


def test_iid_moment_formulas_match_builtin():
    law = WeightModel.iid(CountLaw("const", {"n": 2}), WeightLaw("uniform", {"low": 0.0, "high": 1.0}),
                          exact_m="iid-moments")
    ref = fleet.uniform_pair()
    for th in (0.0, 0.5, 1.0, 2.5):
        assert m_eval(law, th).value == pytest.approx(m_eval(ref, th).value, rel=1e-14)
        assert m_prime_eval(law, th).value == pytest.approx(m_prime_eval(ref, th).value, rel=1e-12)


def test_beta_log_moment_against_quadrature():
    from scipy import integrate, stats
    law = WeightLaw("beta", {"a": 2.0, "b": 3.0})
    val, _ = integrate.quad(lambda x: x**1.5 * math.log(x) * stats.beta.pdf(x, 2, 3), 0, 1)
    assert law.log_moment(1.5) == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("name", ["binary-half", "ternary-third", "uniform-pair", "straddle-mixture"])
def test_mc_m_agrees_with_exact(name):
    model = fleet.NAMED[name]()
    alpha = {"straddle-mixture": 0.4918938277403542}.get(name, 1.0)
    for th in (0.0, alpha / 2, alpha):
        exact = m_eval(model, th).value
        mc = m_eval(model, th, budget=100_000, seed=3, exact=False)
        assert abs(mc.value - exact) <= 4 * mc.stderr + 1e-12


def test_divergence_cap_reports_infinity():
    heavy = WeightModel.iid(CountLaw("const", {"n": 2}), WeightLaw("lognormal", {"mu": 0.0, "sigma": 30.0}))
    assert m_eval(heavy, 1.0, budget=20_000, seed=1).value == math.inf


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 1.0))
def test_m_is_convex(a, b, lam):
    for model in (fleet.binary_half(), fleet.uniform_pair(), fleet.straddle_mixture(), fleet.ternary_third()):
        m = model.exact_m().m
        lhs = m(lam * a + (1 - lam) * b)
        rhs = lam * m(a) + (1 - lam) * m(b)
        assert lhs <= rhs + 1e-12 * (1 + abs(rhs))


mixtures = st.lists(
    st.tuples(st.floats(0.01, 1.0), st.lists(st.floats(0.0, 3.0), min_size=0, max_size=4)),
    min_size=1, max_size=4,
).map(lambda atoms: [(p / sum(q for q, _ in atoms), w) for p, w in atoms])


@given(mixtures, st.integers(0, 2**32))
def test_sampler_never_emits_nonpositive(atoms, seed):
    total = sum(p for p, _ in atoms)
    atoms = [(p / total, w) for p, w in atoms]
    atoms[-1] = (1.0 - sum(p for p, _ in atoms[:-1]), atoms[-1][1])
    model = WeightModel.mixture(atoms)
    counts, w = model.sample_many(64, np.random.default_rng(seed))
    assert np.all(w > 0)
    assert counts.sum() == w.size


@given(mixtures)
def test_json_round_trip(atoms):
    total = sum(p for p, _ in atoms)
    atoms = [(p / total, w) for p, w in atoms]
    atoms[-1] = (1.0 - sum(p for p, _ in atoms[:-1]), atoms[-1][1])
    model = WeightModel.mixture(atoms, name="h")
    back = WeightModel.from_json(model.to_json())
    assert back.to_json() == model.to_json()
    assert back.exact_m().m(0.7) == pytest.approx(model.exact_m().m(0.7), rel=1e-15)


def test_iid_json_round_trip():
    model = fleet.uniform_pair()
    back = WeightModel.from_json(model.to_json())
    assert back.to_dict() == model.to_dict()
    assert back.exact_m().name == "uniform-pair"


def test_json_rejects_unknown_fields():
    with pytest.raises(ModelError):
        WeightModel.from_dict({"variant": {"deterministic": [0.5]}, "colour": "red"})


def test_assumptions_binary_half():
    rep = check_assumptions(fleet.binary_half())
    assert rep.a1_holds and rep.a2_holds and rep.a4a_holds and rep.a5_holds
    assert rep.a3_alpha == pytest.approx(1.0, abs=1e-10)
    assert rep.lattice_span == 2.0


def test_assumptions_uniform_pair():
    rep = check_assumptions(fleet.uniform_pair(), budget=20_000)
    assert rep.a3_alpha == pytest.approx(1.0, abs=1e-10)
    assert rep.evidence["m_prime_at_alpha"] == pytest.approx(-0.5)
    assert rep.a4a_holds and rep.lattice_span == 1.0


def test_assumptions_unit_weights_fail_a1():
    rep = check_assumptions(WeightModel.deterministic([1.0, 1.0]))
    assert not rep.a1_holds
    assert rep.a3_alpha is None


def test_assumptions_unbracketed_alpha():
    rep = check_assumptions(fleet.straddle_atom())
    assert rep.a3_alpha is None
    assert any("not bracketed" in n for n in rep.notes)
    assert rep.a5_holds is False


def test_powered_model_moments():
    model = fleet.uniform_pair().powered(2.0)
    assert model.exact_m().m(0.5) == pytest.approx(fleet.uniform_pair().exact_m().m(1.0))
    em = ExactM("x", lambda th: 1 + (1 - th) ** 2)
    assert em.m(1.0) == 1.0
