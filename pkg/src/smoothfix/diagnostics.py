"""Finite-t checks of small-argument behaviour and of first-exit line statistics."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng as rngmod
from .solutions import SolutionSpec
from .tree import Front, _spawn
from .weights import TSample, WeightModel

DROP_BELOW = 1e-15
SCORE_FACTORS = (0.5, 2.0)
_LATTICE_TOL = 1e-9


class LatticeError(ValueError):
    pass


def _one_minus(f, t: np.ndarray) -> np.ndarray:
    if hasattr(f, "one_minus"):
        return np.asarray(f.one_minus(t), dtype=float)
    return 1.0 - np.asarray(f(t), dtype=float)


def _is_power(x: np.ndarray, r: float) -> np.ndarray:
    k = np.log(x) / math.log(r)
    return np.abs(k - np.round(k)) <= _LATTICE_TOL


@dataclass
class RatioCurve:
    u: float
    t: np.ndarray
    ratio: np.ndarray
    target: float
    dropped: np.ndarray

    @property
    def max_error(self) -> float:
        ok = ~self.dropped
        return float(np.max(np.abs(self.ratio[ok] - self.target))) if ok.any() else math.nan

    def to_csv(self, path) -> None:
        _write_curve(path, self.t, self.ratio, np.full(self.t.size, self.target), np.zeros(self.t.size))


def regvar_curve(f: Callable, alpha: float, u: float, tgrid, lattice_span: float = 1.0) -> RatioCurve:
    """``(1 - f(u t)) / (1 - f(t))`` on ``tgrid`` against ``u**alpha``.

    With ``lattice_span > 1`` the scale factor must be a power of the span and
    the grid must lie in one class ``s * span**Z``.  Points where
    ``1 - f(t) < 1e-15`` are dropped (NaN) and flagged.
    """
    t = np.asarray(tgrid, dtype=float)
    if not u > 0:
        raise ValueError("u must be positive")
    if lattice_span > 1:
        if not _is_power(np.array([u]), lattice_span)[0]:
            raise LatticeError(f"u = {u!r} is not a power of the span {lattice_span!r}")
        if not np.all(_is_power(t / t[0], lattice_span)):
            raise LatticeError("t grid crosses residue classes of the span")
    if u == 1.0:
        return RatioCurve(u, t, np.ones(t.size), 1.0, np.zeros(t.size, bool))
    den = _one_minus(f, t)
    num = _one_minus(f, u * t)
    dropped = den < DROP_BELOW
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dropped, np.nan, num / den)
    return RatioCurve(u, t, ratio, u**alpha, dropped)


@dataclass
class DAlphaCurve:
    t: np.ndarray
    D: np.ndarray
    score: float
    dropped: np.ndarray

    def to_csv(self, path) -> None:
        _write_curve(path, self.t, self.D, np.full(self.t.size, math.nan), np.zeros(self.t.size))


def d_alpha_curve(f: Callable, alpha: float, tgrid, h: Callable | None = None) -> DAlphaCurve:
    """``D(t) = (1 - f(t)) / t**alpha`` with a slow-variation score.

    The score is ``max_u |D(u t0) / D(t0) - 1|`` over ``u`` in ``{0.5, 2}`` at
    the smallest grid point ``t0``; with ``h`` given, ``D / h`` is scored.
    """
    t = np.asarray(tgrid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("grid must be positive")

    def D(x: np.ndarray) -> np.ndarray:
        out = _one_minus(f, x) / x**alpha
        return out / h(x) if h is not None else out

    om = _one_minus(f, t)
    dropped = om < DROP_BELOW
    vals = np.where(dropped, np.nan, om / t**alpha)
    t0 = np.array([t[0]])
    base = D(t0)[0]
    score = max(abs(D(u * t0)[0] / base - 1.0) for u in SCORE_FACTORS)
    return DAlphaCurve(t, vals, float(score), dropped)


def nerman_ratio(front: Front, alpha: float, beta: float, c: float) -> float | np.ndarray:
    """Overshoot-weighted mass of a first-exit front relative to its alpha-mass.

    Computes ``sum exp(-beta (S - t)) 1{S - t > c} / sum exp(-alpha (S - t))``
    per tree; NaN with a warning for an empty front.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if front.kind not in ("first_exit", "ladder"):
        raise ValueError("nerman_ratio needs a first-exit front")
    over = front.S - front.level
    num = front.per_tree_sum(np.exp(-beta * over) * (over > c))
    den = front.per_tree_sum(np.exp(-alpha * over))
    if np.any(den == 0):
        warnings.warn("empty first-exit front: ratio undefined", stacklevel=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return float(out[0]) if front.n_trees == 1 else out


def epsilon_limit(model: WeightModel, alpha: float, c: float, budget: int = 100_000,
                  seed: int = 0) -> float:
    """``E (S_1 - c)^+ / E S_1`` for the step law weighted by ``T**alpha``.

    This is the large-``t`` limit of ``nerman_ratio`` with ``beta = alpha`` in
    the non-lattice case.
    """
    if model.is_finite:
        num, den = 0.0, 0.0
        for p, seq in model.atoms:
            w = np.asarray(seq, dtype=float) ** model.power
            s = -np.log(w)
            num += p * np.sum(w**alpha * np.maximum(s - c, 0.0))
            den += p * np.sum(w**alpha * s)
        return float(num / den)
    sample = TSample.draw(model, budget, seed)
    a = np.exp(alpha * sample.logw)
    s = -sample.logw
    return float(np.sum(a * np.maximum(s - c, 0.0)) / np.sum(a * s))


# --------------------------------------------------------------------------
# line statistics against W


@dataclass
class ApprWTrace:
    t: np.ndarray
    gaps: np.ndarray  # (reps, len(t)) statistic minus proxy
    proxy: np.ndarray
    capped: np.ndarray

    @property
    def mean_gap(self) -> np.ndarray:
        return self.gaps.mean(axis=0)

    @property
    def mean_abs_gap(self) -> np.ndarray:
        return np.abs(self.gaps).mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        n = self.gaps.shape[0]
        return np.abs(self.gaps).std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(self.t.size)

    def shrink_z(self, i: int, j: int) -> float:
        """Paired z score for ``mean |gap|`` at index ``i`` exceeding that at ``j``."""
        d = np.abs(self.gaps[:, i]) - np.abs(self.gaps[:, j])
        m, se = rngmod.mean_stderr(d)
        return m / se if se > 0 else (math.inf if m > 0 else 0.0)

    def to_csv(self, path) -> None:
        _write_curve(path, self.t, self.mean_abs_gap, np.zeros(self.t.size), self.stderr)


def _line_sums(model: WeightModel, alpha: float, levels: np.ndarray, k: int,
               rng: np.random.Generator, max_generation: int) -> tuple[np.ndarray, np.ndarray]:
    """``sum_{v in line(t)} L(v)**alpha`` for every level and each of ``k`` trees.

    A vertex lies on the first-exit line at ``t`` of ``alpha * S`` iff the
    running maximum over its strict ancestors is ``<= t < alpha * S(v)``.
    """
    top = levels[-1]
    S = np.zeros(k)
    tree = np.arange(k)
    runmax = np.zeros(k)
    sums = np.zeros((k, levels.size))
    capped = np.zeros(k, dtype=bool)
    for _ in range(max_generation):
        if S.size == 0:
            break
        ch = _spawn(model, S, rng)
        cS = alpha * ch.S
        ctree = tree[ch.parent]
        prev = runmax[ch.parent]
        on = (prev[:, None] <= levels[None, :]) & (levels[None, :] < cS[:, None])
        if on.any():
            rows, cols = np.nonzero(on)
            np.add.at(sums, (ctree[rows], cols), np.exp(-cS[rows]))
        live = cS <= top
        S, tree, runmax = ch.S[live], ctree[live], np.maximum(prev, cS)[live]
    if S.size:
        capped[np.unique(tree)] = True
    return sums, capped


def appr_W_trace(model: WeightModel, sol: SolutionSpec, tlist, reps: int = 400, seed: int = 0,
                 proxy_offset: float = 4.0, max_generation: int = 128,
                 workers: int = 1) -> ApprWTrace:
    """Line statistic ``e^t (1 - phi(e^-t)) W_line(t)`` minus an on-tree ``W`` proxy.

    Everything is in the substituted scale where weights are ``T**alpha``:
    lines are first exits of ``alpha * S`` and ``phi(s) = f(s**(1/alpha))``
    for the solution ``f`` (built with constant ``h``), rescaled so that its
    mixing variable has mean one.  The proxy is the line sum at level
    ``max(tlist) + proxy_offset`` on the same tree.
    """
    t = np.asarray(tlist, dtype=float)
    if np.any(np.diff(t) <= 0) or np.any(t < 0):
        raise ValueError("tlist must be non-negative and increasing")
    if not sol.h.is_constant:
        raise ValueError("the solution must be built with constant h")
    alpha = sol.alpha
    levels = np.append(t, t[-1] + proxy_offset)
    parts = rngmod.map_blocks(
        lambda k, g: _line_sums(model, alpha, levels, k, g, max_generation), seed, reps, workers, block_size=64
    )
    sums = np.concatenate([p[0] for p in parts])
    capped = np.concatenate([p[1] for p in parts])
    # scale-match the solution to mean-one W before comparing with the tree
    scale = float(sol.h(1.0)) * float(sol.w.samples.mean())
    factor = np.exp(t) * sol.one_minus(np.exp(-t / alpha)) / scale
    stats = sums[:, :-1] * factor[None, :]
    proxy = sums[:, -1]
    if capped.any():
        warnings.warn(f"generation cap hit in {capped.mean():.1%} of trees", stacklevel=2)
    return ApprWTrace(t, stats - proxy[:, None], proxy, capped)


def _write_curve(path, t, value, target, stderr) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value", "target", "stderr"])
        for row in zip(t, value, target, stderr):
            w.writerow([repr(float(x)) for x in row])
