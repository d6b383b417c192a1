from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smoothfix import fleet
from smoothfix.rng import mean_stderr
from smoothfix.tree import (Caps, PopulationCapExceeded, Prune, expand, first_exit_front,
                            generation_front, ladder_front, log_sum_exp_per_tree, root_front,
                            sup_weight)

from conftest import STRADDLE_ALPHA

# exhaustive enumeration of the straddle mixture to depth 20 (child 1 has weight 0.2
# surely, child 2 has weight 1.2 with probability 1/2)
EXIT_T1 = {"mass": 0.999623182415233, "exp_s": 0.22663344418442316,
           "count": 2.126983642578125, "leak": 0.0003768175847624986}
LADDER = {"mass": 0.9999026778938176, "exp_s": 0.2591188396363755,
          "count": 2.0038223266601562, "leak": 9.732210618295799e-05}


def test_binary_generation_three(rng):
    f = generation_front(fleet.binary_half(), 3, rng)
    assert f.size == 8
    assert np.allclose(f.L, 0.125)
    assert sorted(f.path_strings())[0] == "1.1.1"


def test_expand_root(rng):
    f = expand(root_front(), fleet.ternary_third(), rng)
    assert f.size == 3 and f.level == 1
    assert f.path_strings() == ["1", "2", "3"]


def test_generation_zero_is_root(rng):
    f = generation_front(fleet.uniform_pair(), 0, rng)
    assert f.size == 1 and f.S[0] == 0.0


def test_first_exit_binary(rng):
    f = first_exit_front(fleet.binary_half(), 2.5 * math.log(2), rng, alpha=1.0)
    assert f.size == 8
    assert np.all(f.generation == 3)
    assert f.leaked_mass == 0.0


def test_first_exit_at_zero_is_generation_one(rng):
    f = first_exit_front(fleet.binary_half(), 0.0, rng)
    assert f.size == 2 and np.all(f.generation == 1)


def test_leak_is_nan_without_alpha(rng):
    f = first_exit_front(fleet.binary_half(), 10.0, rng, caps=Caps(max_generation=3))
    assert f.capped and math.isnan(f.leaked_mass)
    g = first_exit_front(fleet.binary_half(), 10.0, rng, alpha=1.0, caps=Caps(max_generation=3))
    assert g.leaked_mass == pytest.approx(1.0)


def test_population_cap(rng):
    with pytest.raises(PopulationCapExceeded) as info:
        generation_front(fleet.binary_half(), 12, rng, max_nodes=1000)
    assert info.value.front.size == 512
    assert info.value.attempted == 1024


def test_pruning_accounts_for_mass(rng):
    f = generation_front(fleet.uniform_pair(), 8, rng, prune=Prune(1.0, 1e-3), n_trees=200)
    total = f.per_tree_sum(f.L) + f.leaked
    assert np.all(f.L >= 1e-3)
    assert abs(total.mean() - 1.0) < 4 * total.std() / math.sqrt(200) + 1e-12


def test_sup_weight_examples(rng):
    assert sup_weight(generation_front(fleet.binary_half(), 4, rng)) == 0.0625
    assert sup_weight(root_front()) == 1.0


def test_sup_weight_shrinks_on_one_tree():
    rng = np.random.default_rng(7)
    f5 = generation_front(fleet.uniform_pair(), 5, rng, n_trees=50)
    f10 = f5
    for _ in range(5):
        f10 = expand(f10, fleet.uniform_pair(), rng)
    assert np.all(sup_weight(f10) <= sup_weight(f5))


def test_log_sum_exp(rng):
    f = generation_front(fleet.binary_half(), 5, rng, n_trees=3)
    assert np.allclose(log_sum_exp_per_tree(f, 1.0), 0.0, atol=1e-12)
    assert np.allclose(log_sum_exp_per_tree(f, 0.0), math.log(32))


def test_to_csv(tmp_path, rng):
    f = first_exit_front(fleet.binary_half(), 0.5, rng, alpha=1.0)
    p = tmp_path / "front.csv"
    f.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "vertex_path,generation,S,L_alpha_mass"
    assert lines[1].startswith("1,1,")


@given(st.integers(0, 2**32), st.floats(0.0, 3.0))
def test_first_exit_is_antichain_and_additive(seed, t):
    rng = np.random.default_rng(seed)
    f = first_exit_front(fleet.uniform_pair(), t, rng, alpha=1.0, debug=True, caps=Caps(max_nodes=20_000))
    assert f.is_antichain()
    assert np.allclose(f.steps.sum(axis=1), f.S, rtol=1e-12, atol=1e-12)
    if not f.capped:
        assert np.all(f.S > t)


@given(st.integers(0, 2**32))
def test_ladder_is_antichain(seed):
    rng = np.random.default_rng(seed)
    f = ladder_front(fleet.straddle_mixture(), rng, alpha=STRADDLE_ALPHA, debug=True)
    assert f.is_antichain()
    assert np.all(f.S > 0)
    # every strict ancestor sits at or below level 0
    anc = np.cumsum(f.steps, axis=1)
    for row, g in zip(anc, f.generation):
        assert np.all(row[: g - 1] <= 0)


def _check_line(front, oracle):
    L = front.L
    a = front.per_tree_sum(L**STRADDLE_ALPHA)
    b = front.per_tree_sum(L**STRADDLE_ALPHA * np.exp(-front.S))
    c = np.bincount(front.tree, minlength=front.n_trees).astype(float)
    for vals, key in ((a, "mass"), (b, "exp_s"), (c, "count")):
        m, se = mean_stderr(vals)
        assert abs(m - oracle[key]) <= 4 * se, key
    # mass on the line plus leaked mass is a mean-one quantity; oracle sums agree
    assert oracle["mass"] + oracle["leak"] == pytest.approx(1.0, abs=1e-12)
    m, se = mean_stderr(a + front.leaked)
    assert abs(m - 1.0) <= 4 * se


def test_straddle_first_exit_against_enumeration():
    f = first_exit_front(fleet.straddle_mixture(), 1.0, np.random.default_rng(11), alpha=STRADDLE_ALPHA,
                         caps=Caps(max_generation=20), n_trees=10_000, track_paths=False)
    _check_line(f, EXIT_T1)


def test_straddle_ladder_against_enumeration():
    f = ladder_front(fleet.straddle_mixture(), np.random.default_rng(12), alpha=STRADDLE_ALPHA,
                     caps=Caps(max_generation=20), n_trees=10_000, track_paths=False)
    _check_line(f, LADDER)
