"""Tree sums versus tilted random walks (spine estimators).

The spine picks child ``i`` with probability ``T_i**alpha / sum_j T_j**alpha``
and multiplies its importance weight by ``sum_j T_j**alpha``, so that
``E[weight * g(S_n)]`` equals ``E sum_{|v|=n} exp(-alpha S(v)) g(S(v))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng as rngmod
from .tree import Caps, first_exit_front, generation_front
from .weights import WeightModel

G_BOUND = 1e6
UNBOUNDED_WIDEN = 2.0  # stderr inflation applied when g is declared unbounded

G_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": lambda s: np.ones_like(s),
    "exp": lambda s: np.exp(-s),
    "min3": lambda s: np.minimum(s, 3.0),
}


def resolve_g(g) -> Callable[[np.ndarray], np.ndarray]:
    if callable(g):
        return g
    try:
        return G_FUNCTIONS[g]
    except KeyError:
        raise ValueError(f"unknown g {g!r}; choose from {sorted(G_FUNCTIONS)}") from None


@dataclass
class SpineWalks:
    S: np.ndarray
    weight: np.ndarray
    absorbed: np.ndarray
    steps: np.ndarray  # number of steps taken before stopping or absorption
    unfinished: np.ndarray | None = None  # still at or below the level when stopped


def _spine_step(model: WeightModel, alpha: float, n: int, rng: np.random.Generator
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One step for ``n`` walkers: ``(increment, importance weight, absorbed)``."""
    counts, w = model.sample_many(n, rng)
    owner = np.repeat(np.arange(n), counts)
    a = w**alpha
    total = np.bincount(owner, weights=a, minlength=n)
    absorbed = counts == 0
    cs = np.cumsum(a)
    end = np.cumsum(counts)
    start = end - counts
    base = np.where(start > 0, cs[np.maximum(start - 1, 0)], 0.0)
    u = base + rng.random(n) * total
    pick = np.searchsorted(cs, u, side="right")
    # guard against rounding at the segment's upper end
    pick = np.clip(pick, start, np.maximum(end - 1, start))
    step = np.zeros(n)
    live = ~absorbed
    step[live] = -np.log(w[pick[live]])
    return step, total, absorbed


def spine_walk(model: WeightModel, alpha: float, n: int, rng: np.random.Generator,
               size: int = 1) -> SpineWalks:
    """``size`` independent spines run for ``n`` steps."""
    if n < 0:
        raise ValueError("n must be >= 0")
    S = np.zeros(size)
    weight = np.ones(size)
    absorbed = np.zeros(size, dtype=bool)
    taken = np.zeros(size, dtype=np.int64)
    for _ in range(n):
        idx = np.flatnonzero(~absorbed)
        if idx.size == 0:
            break
        step, total, dead = _spine_step(model, alpha, idx.size, rng)
        S[idx] += step
        weight[idx] *= total
        absorbed[idx[dead]] = True
        taken[idx] += 1
    weight[absorbed] = 0.0
    return SpineWalks(S, weight, absorbed, taken)


def stopped_spine(model: WeightModel, alpha: float, rng: np.random.Generator, size: int,
                  level: float = 0.0, max_steps: int = 64) -> SpineWalks:
    """Spines run until ``S > level``; walkers still below after ``max_steps`` are flagged."""
    S = np.zeros(size)
    weight = np.ones(size)
    absorbed = np.zeros(size, dtype=bool)
    taken = np.zeros(size, dtype=np.int64)
    active = np.ones(size, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        step, total, dead = _spine_step(model, alpha, idx.size, rng)
        S[idx] += step
        weight[idx] *= total
        taken[idx] += 1
        absorbed[idx[dead]] = True
        active[idx[dead | (S[idx] > level)]] = False
    weight[absorbed] = 0.0
    return SpineWalks(S, weight, absorbed, taken, unfinished=active)


def _guard(vals: np.ndarray, unbounded: bool) -> np.ndarray:
    if not unbounded and np.any(np.abs(vals) > G_BOUND):
        raise ValueError(f"g exceeded the bound {G_BOUND:g}; pass unbounded=True to allow it")
    return vals


@dataclass
class Comparison:
    tree_mean: float
    tree_stderr: float
    spine_mean: float
    spine_stderr: float
    leaked: float = 0.0

    @property
    def z(self) -> float:
        diff = self.tree_mean - self.spine_mean
        pooled = math.hypot(self.tree_stderr, self.spine_stderr)
        if pooled == 0.0:
            return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
        return diff / pooled


def check_many_to_one(model: WeightModel, alpha: float, n: int, g, tree_reps: int = 10_000,
                      spine_reps: int = 10_000, seed: int = 0, workers: int = 1,
                      unbounded: bool = False) -> Comparison:
    """Generation-``n`` tree sum against the ``n``-step spine, both weighted by ``g``."""
    g = resolve_g(g)

    def tree_block(k: int, rng: np.random.Generator) -> np.ndarray:
        front = generation_front(model, n, rng, n_trees=k, track_paths=False)
        vals = np.exp(-alpha * front.S) * _guard(g(front.S), unbounded)
        return front.per_tree_sum(vals)

    def spine_block(k: int, rng: np.random.Generator) -> np.ndarray:
        walks = spine_walk(model, alpha, n, rng, size=k)
        out = np.zeros(k)
        live = ~walks.absorbed
        out[live] = walks.weight[live] * _guard(g(walks.S[live]), unbounded)
        return out

    return _compare(tree_block, spine_block, tree_reps, spine_reps, seed, workers, unbounded)


def check_ladder_identity(model: WeightModel, alpha: float, g, tree_reps: int = 10_000,
                          spine_reps: int = 10_000, seed: int = 0, workers: int = 1,
                          caps: Caps = Caps(), unbounded: bool = False) -> Comparison:
    """Ladder-line tree sum against the spine stopped at its first positive position.

    ``leaked`` is the mean mass the tree side lost to the caps.
    """
    g = resolve_g(g)
    leaks: list[np.ndarray] = []

    def tree_block(k: int, rng: np.random.Generator) -> np.ndarray:
        front = first_exit_front(model, 0.0, rng, alpha=alpha, caps=caps, n_trees=k,
                                 track_paths=False, kind="ladder")
        leaks.append(front.leaked)
        vals = np.exp(-alpha * front.S) * _guard(g(front.S), unbounded)
        return front.per_tree_sum(vals)

    def spine_block(k: int, rng: np.random.Generator) -> np.ndarray:
        walks = stopped_spine(model, alpha, rng, k, 0.0, caps.max_generation)
        ok = ~walks.absorbed & ~walks.unfinished
        out = np.zeros(k)
        out[ok] = walks.weight[ok] * _guard(g(walks.S[ok]), unbounded)
        return out

    # tree blocks run serially so the leak list stays in block order
    res = _compare(tree_block, spine_block, tree_reps, spine_reps, seed, 1, unbounded)
    res.leaked = float(np.concatenate(leaks).mean()) if leaks else 0.0
    return res


def _compare(tree_block, spine_block, tree_reps: int, spine_reps: int, seed: int, workers: int,
             unbounded: bool) -> Comparison:
    t = np.concatenate(rngmod.map_blocks(tree_block, rngmod.derive_seed(seed, "tree"), tree_reps, workers))
    s = np.concatenate(rngmod.map_blocks(spine_block, rngmod.derive_seed(seed, "spine"), spine_reps, workers))
    tm, tse = rngmod.mean_stderr(t)
    sm, sse = rngmod.mean_stderr(s)
    if unbounded:
        tse *= UNBOUNDED_WIDEN
        sse *= UNBOUNDED_WIDEN
    return Comparison(tm, tse, sm, sse)
