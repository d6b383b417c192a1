from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smoothfix.rng import SEED_MAX, blocks, check_seed, derive_seed, map_blocks, mean_stderr


def test_seed_validation():
    assert check_seed(SEED_MAX) == SEED_MAX
    with pytest.raises(ValueError):
        check_seed(-1)
    with pytest.raises(TypeError):
        check_seed(1.5)
    with pytest.raises(TypeError):
        check_seed(True)


def test_derived_seeds_differ():
    assert derive_seed(1, "tree") != derive_seed(1, "spine")
    assert derive_seed(1, "tree") == derive_seed(1, "tree")
    assert derive_seed(1, "tree") != derive_seed(2, "tree")


@given(st.integers(0, 5000), st.integers(1, 300))
def test_blocks_partition(reps, size):
    parts = blocks(reps, size)
    assert sum(b - a for a, b in parts) == reps
    assert all(parts[i][1] == parts[i + 1][0] for i in range(len(parts) - 1))


@given(st.integers(0, SEED_MAX), st.integers(1, 2000), st.integers(1, 8))
def test_map_blocks_independent_of_workers(seed, reps, workers):
    fn = lambda n, g: g.random(n)  # noqa: E731
    a = np.concatenate(map_blocks(fn, seed, reps, 1))
    b = np.concatenate(map_blocks(fn, seed, reps, workers))
    assert np.array_equal(a, b)
    assert a.size == reps


def test_mean_stderr():
    assert mean_stderr(np.array([2.0])) == (2.0, 0.0)
    m, se = mean_stderr(np.array([1.0, 3.0]))
    assert m == 2.0 and se == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mean_stderr(np.array([]))
