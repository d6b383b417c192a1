"""Weibull-mixture solutions ``f(t) = E exp(-W h(t) t**alpha)`` and their checks.

Besides evaluation, this module applies the smoothing map
``f -> E prod_i f(t T_i)`` by Monte Carlo, measures fixed-point residuals,
samples min-type fixed points, and runs one step of the sum/min recursions.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng as rngmod
from .martingales import EmpiricalW
from .weights import TSample, WeightModel

H_GRID_POINTS = 32
CHECK_REFINE = 16
TABLE_POINTS = 4096
TABLE_RANGE = (1e-8, 1e3)
RESIDUAL_BATCHES = 20
_CHUNK = 256
_TINY = 1e-300


class SolutionError(ValueError):
    pass


# --------------------------------------------------------------------------
# periodic factors


@dataclass(frozen=True, eq=False)
class PeriodicH:
    """A positive, multiplicatively periodic factor ``h``.

    ``span == 1`` means constant ``h``.  Otherwise ``log h`` is linear in
    ``x = frac(log_span t)`` between the grid points ``x_k = k / K``, wrapping
    around at ``x = 1``.
    """

    span: float
    log_values: np.ndarray
    alpha: float | None = None

    @classmethod
    def constant(cls, c: float = 1.0) -> "PeriodicH":
        if not c > 0:
            raise SolutionError("constant h must be positive")
        return cls(1.0, np.array([math.log(c)]))

    @classmethod
    def lattice(cls, span: float, values, alpha: float) -> "PeriodicH":
        """Grid values of ``h`` at ``span**(k/K)``, ``k = 0..K-1``.

        Raises ``SolutionError`` unless ``h(t) t**alpha`` is non-decreasing.
        """
        values = np.asarray(values, dtype=float)
        if span <= 1:
            raise SolutionError("lattice span must exceed 1")
        if values.ndim != 1 or values.size < 1 or np.any(~(values > 0)):
            raise SolutionError("h values must be positive")
        h = cls(float(span), np.log(values), float(alpha))
        if not h.is_monotone(alpha):
            raise SolutionError("h(t) t^alpha is not non-decreasing")
        return h

    @classmethod
    def from_function(cls, span: float, fn: Callable[[np.ndarray], np.ndarray], alpha: float,
                      points: int = H_GRID_POINTS) -> "PeriodicH":
        """Tabulate ``h`` from ``fn(x)``, ``x`` the fractional log-position in ``[0, 1)``."""
        x = np.arange(points) / points
        return cls.lattice(span, fn(x), alpha)

    @property
    def is_constant(self) -> bool:
        return self.span == 1.0

    def scaled(self, c: float) -> "PeriodicH":
        return PeriodicH(self.span, self.log_values + math.log(c), self.alpha)

    def _log_h_frac(self, x: np.ndarray) -> np.ndarray:
        k = self.log_values.size
        pos = x * k
        i = np.floor(pos).astype(np.int64) % k
        w = pos - np.floor(pos)
        lv = self.log_values
        return (1 - w) * lv[i] + w * lv[(i + 1) % k]

    def log_h(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.is_constant:
            return np.full(t.shape, self.log_values[0])
        u = np.log(t) / math.log(self.span)
        return self._log_h_frac(u - np.floor(u))

    def __call__(self, t) -> np.ndarray:
        return np.exp(self.log_h(t))

    def log_G(self, t, alpha: float) -> np.ndarray:
        """``log(h(t) t**alpha)``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.log_h(t) + alpha * np.log(t)

    def _phi_nodes(self, alpha: float) -> np.ndarray:
        # log G at t = span**u for u = k/K, k = 0..K (one full period)
        k = self.log_values.size
        u = np.arange(k + 1) / k
        lv = np.append(self.log_values, self.log_values[0])
        return lv + alpha * math.log(self.span) * u

    def is_monotone(self, alpha: float, strict: bool = False) -> bool:
        if self.is_constant:
            return True
        fine = np.arange(self.log_values.size * CHECK_REFINE + 1) / (self.log_values.size * CHECK_REFINE)
        vals = self._log_h_frac(fine % 1.0) + alpha * math.log(self.span) * fine
        d = np.diff(vals)
        tol = 1e-14 * (1 + np.abs(vals[:-1]))
        return bool(np.all(d > tol)) if strict else bool(np.all(d >= -tol))

    def invert(self, log_y: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        """Smallest ``t`` with ``log G(t) = log_y``, plus a flat-stretch flag.

        Exact for the piecewise-linear ``log h``; ``log_y = +inf`` maps to
        ``+inf``.
        """
        log_y = np.asarray(log_y, dtype=float)
        if self.is_constant:
            return np.exp((log_y - self.log_values[0]) / alpha), np.zeros(log_y.shape, bool)
        phi = self._phi_nodes(alpha)
        period = phi[-1] - phi[0]
        finite = np.isfinite(log_y)
        z = np.where(finite, log_y, phi[0])
        n_per = np.floor((z - phi[0]) / period)
        rem = z - n_per * period
        j = np.clip(np.searchsorted(phi, rem, side="left") - 1, 0, phi.size - 2)
        lo, hi = phi[j], phi[j + 1]
        step = hi - lo
        frac = np.where(step > 0, (rem - lo) / np.where(step > 0, step, 1.0), 0.0)
        # several nodes share the target value: the solution set is an interval
        flat = (np.searchsorted(phi, rem, side="right") - np.searchsorted(phi, rem, side="left")) > 1
        u = n_per + (j + np.clip(frac, 0.0, 1.0)) / (phi.size - 1)
        t = np.exp(u * math.log(self.span))
        t = np.where(finite, t, np.where(log_y > 0, np.inf, 0.0))
        return t, flat & finite

    def to_dict(self) -> dict:
        if self.is_constant:
            return {"constant": math.exp(self.log_values[0])}
        return {"span": self.span, "values": np.exp(self.log_values).tolist(), "alpha": self.alpha}

    @classmethod
    def from_dict(cls, doc: dict) -> "PeriodicH":
        if "constant" in doc:
            return cls.constant(float(doc["constant"]))
        return cls.lattice(float(doc["span"]), doc["values"], float(doc["alpha"]))


# --------------------------------------------------------------------------
# solutions


@dataclass
class SolutionSpec:
    alpha: float
    h: PeriodicH
    w: EmpiricalW

    def __post_init__(self) -> None:
        if self.w.samples.size == 0:
            raise SolutionError("empty W sample set")
        if not self.h.is_monotone(self.alpha):
            raise SolutionError("h(t) t^alpha is not non-decreasing")

    def _terms(self, t, fn) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        G = np.where(flat > 0, np.exp(self.h.log_G(np.where(flat > 0, flat, 1.0), self.alpha)), 0.0)
        W = self.w.samples
        mean = np.empty(flat.size)
        sd = np.empty(flat.size)
        for lo in range(0, flat.size, _CHUNK):
            x = fn(-np.outer(G[lo:lo + _CHUNK], W))
            mean[lo:lo + _CHUNK] = x.mean(axis=1)
            sd[lo:lo + _CHUNK] = x.std(axis=1, ddof=1) if W.size > 1 else 0.0
        return mean.reshape(t.shape), (sd / math.sqrt(W.size)).reshape(t.shape)

    def eval(self, t) -> np.ndarray:
        """``E exp(-W h(t) t**alpha)``; equals 1 at ``t = 0``."""
        return self._terms(t, np.exp)[0]

    def eval_stderr(self, t) -> tuple[np.ndarray, np.ndarray]:
        return self._terms(t, np.exp)

    def one_minus(self, t) -> np.ndarray:
        """``1 - f(t)`` without cancellation for small ``t``."""
        return -self._terms(t, np.expm1)[0]

    def __call__(self, t) -> np.ndarray:
        return self.eval(t)

    def scaled_h(self, c: float) -> "SolutionSpec":
        return SolutionSpec(self.alpha, self.h.scaled(c), self.w)

    def scaled_w(self, c: float) -> "SolutionSpec":
        return SolutionSpec(self.alpha, self.h, self.w.scaled(c))

    def to_dict(self, w_path=None) -> dict:
        doc = {"alpha": self.alpha, "h": self.h.to_dict()}
        if "constant" in self.w.meta and self.w.samples.size == 1:
            doc["w"] = {"constant": float(self.w.samples[0])}
        else:
            if w_path is None:
                raise SolutionError("W samples must be persisted first; pass w_path")
            doc["w"] = {"path": str(w_path), "sha256": self.w.checksum()}
        return doc

    def to_json(self, w_path=None) -> str:
        return json.dumps(self.to_dict(w_path), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "SolutionSpec":
        wdoc = doc["w"]
        if "constant" in wdoc:
            w = EmpiricalW.constant(float(wdoc["constant"]))
        else:
            w = EmpiricalW.load(wdoc["path"])
            if w.checksum() != wdoc["sha256"]:
                raise SolutionError("W cache checksum differs from the one recorded")
        return cls(float(doc["alpha"]), PeriodicH.from_dict(doc["h"]), w)


def eval_f(sol: SolutionSpec, t) -> np.ndarray | float:
    out = sol.eval(t)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# grid functions


@dataclass
class GridFunction:
    """Values of a function of ``t`` on a strictly increasing positive grid.

    As an evaluator it interpolates ``-log f`` linearly in log-log
    coordinates, extends below the grid with ``exp(-D t**alpha)`` fitted at
    the first point, and holds the last value above the grid.
    """

    t: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    alpha: float = 1.0

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.stderr is None:
            self.stderr = np.zeros_like(self.values)
        if self.t.ndim != 1 or self.t.size != self.values.size or self.t.size == 0:
            raise ValueError("grid and values must be 1-d of equal length")
        if np.any(self.t <= 0) or np.any(np.diff(self.t) <= 0):
            raise ValueError("grid must be positive and strictly increasing")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("grid values must lie in [0, 1]")

    @classmethod
    def tabulate(cls, f: Callable, alpha: float, lo: float = TABLE_RANGE[0], hi: float = TABLE_RANGE[1],
                 points: int = TABLE_POINTS) -> "GridFunction":
        t = np.geomspace(lo, hi, points)
        return cls(t, np.clip(f(t), 0.0, 1.0), alpha=alpha)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        # clipping keeps log-log interpolation usable past underflow and at f = 1
        nl = np.clip(-np.log(np.maximum(self.values, _TINY)), _TINY, None)
        out = np.empty(s.shape)
        below = s < self.t[0]
        above = s > self.t[-1]
        mid = ~(below | above)
        d_hat = nl[0] / self.t[0] ** self.alpha
        out[below] = np.exp(-d_hat * s[below] ** self.alpha)
        out[above] = self.values[-1]
        if mid.any():
            x = np.log(s[mid])
            out[mid] = np.exp(-np.exp(np.interp(x, np.log(self.t), np.log(nl))))
        out[out < _TINY] = 0.0
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f", "stderr"])
            for a, b, c in zip(self.t, self.values, self.stderr):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])


# --------------------------------------------------------------------------
# the smoothing map and residuals


def _map_on_sample(f: Callable, sample: TSample, tgrid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = np.empty(tgrid.size)
    ses = np.empty(tgrid.size)
    for i, t in enumerate(tgrid):
        vals = np.asarray(f(t * sample.weights), dtype=float)
        with np.errstate(divide="ignore"):
            logs = np.log(vals)
        zero = np.bincount(sample.owner, weights=(vals == 0).astype(float), minlength=sample.size) > 0
        acc = sample.per_sample(np.where(vals > 0, logs, 0.0))
        y = np.where(zero, 0.0, np.exp(acc))
        means[i], ses[i] = rngmod.mean_stderr(y)
    return means, ses


def smoothing_map(f: Callable, model: WeightModel, tgrid, reps: int = 10_000, seed: int = 0,
                  workers: int = 1, alpha: float = 1.0) -> GridFunction:
    """``t -> E prod_i f(t T_i)`` on ``tgrid``, one shared batch of ``T`` for all ``t``."""
    tgrid = np.asarray(tgrid, dtype=float)
    if model.is_deterministic:
        sample = TSample.draw(model, 1, seed)
    else:
        sample = TSample.draw(model, reps, seed, workers)
    means, ses = _map_on_sample(f, sample, tgrid)
    return GridFunction(tgrid, np.clip(means, 0.0, 1.0), ses, alpha)


@dataclass
class Residual:
    t: np.ndarray
    f: np.ndarray
    mapped: np.ndarray
    stderr: np.ndarray

    @property
    def diff(self) -> np.ndarray:
        return self.f - self.mapped

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.diff)))

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.diff / self.stderr
        return np.where(self.stderr > 0, z, np.where(np.abs(self.diff) <= 1e-12, 0.0, np.inf))

    @property
    def worst_z(self) -> float:
        return float(np.max(np.abs(self.z)))


def residual(sol: SolutionSpec, model: WeightModel, tgrid, reps: int = 10_000, seed: int = 0,
             workers: int = 1, batches: int = RESIDUAL_BATCHES) -> Residual:
    """Pointwise ``f - E prod_i f(t T_i)`` on ``tgrid``.

    A deterministic model with a constant-``W`` solution is evaluated exactly.
    Otherwise ``f`` is tabulated once on a fine log grid and the map is
    averaged over ``reps`` draws of ``T``; the stderr comes from batch means
    over disjoint groups of ``W`` samples, each paired with its own ``T``
    draws, so both sources of noise are included.
    """
    tgrid = np.asarray(tgrid, dtype=float)
    f_t = sol.eval(tgrid)
    if model.is_deterministic and sol.w.samples.size == 1:
        sample = TSample.draw(model, 1, seed)
        mapped, _ = _map_on_sample(sol.eval, sample, tgrid)
        return Residual(tgrid, f_t, mapped, np.zeros_like(tgrid))
    if model.is_deterministic:
        sample = TSample.draw(model, 1, seed)
        table = GridFunction.tabulate(sol.eval, sol.alpha)
        mapped, _ = _map_on_sample(table, sample, tgrid)
    else:
        sample = TSample.draw(model, reps, rngmod.derive_seed(seed, "full"), workers)
        table = GridFunction.tabulate(sol.eval, sol.alpha)
        mapped, _ = _map_on_sample(table, sample, tgrid)

    W = sol.w.samples
    if W.size < 2 * batches:
        raise SolutionError(f"need at least {2 * batches} W samples for the batch stderr")
    groups = np.array_split(W, batches)
    per_batch = max(reps // batches, 1)

    def one(b: int) -> np.ndarray:
        sub = SolutionSpec(sol.alpha, sol.h, EmpiricalW(groups[b]))
        tab = GridFunction.tabulate(sub.eval, sol.alpha, points=TABLE_POINTS // 4)
        if model.is_deterministic:
            s = sample
        else:
            s = TSample.draw(model, per_batch, rngmod.derive_seed(seed, f"batch{b}"))
        m, _ = _map_on_sample(tab, s, tgrid)
        return sub.eval(tgrid) - m

    diffs = np.array([one(b) for b in range(batches)])
    se = diffs.std(axis=0, ddof=1) / math.sqrt(batches)
    return Residual(tgrid, f_t, mapped, se)


# --------------------------------------------------------------------------
# sample-level recursions


@dataclass
class MinSamples:
    x: np.ndarray
    flat_hits: int = 0


def sample_min_solution(sol: SolutionSpec, n: int, rng: np.random.Generator) -> MinSamples:
    """Draw from ``P(X > t) = f(t)``: solve ``h(X) X**alpha = E / W``.

    ``E`` is standard exponential and ``W`` is drawn uniformly from the
    samples; ``W = 0`` gives ``X = +inf``.  ``flat_hits`` counts draws that
    fell on a flat stretch of ``h(t) t**alpha`` (the leftmost solution is
    returned for those).
    """
    W = sol.w.samples[rng.integers(sol.w.samples.size, size=n)]
    E = rng.standard_exponential(n)
    with np.errstate(divide="ignore"):
        log_y = np.log(E) - np.log(W)
    x, flat = sol.h.invert(log_y, sol.alpha)
    return MinSamples(np.where(W > 0, x, np.inf), int(flat.sum()))


def _resample(xs: np.ndarray, model: WeightModel, n: int, rng: np.random.Generator):
    xs = np.asarray(xs, dtype=float)
    counts, w = model.sample_many(n, rng)
    owner = np.repeat(np.arange(n), counts)
    picks = xs[rng.integers(xs.size, size=w.size)] if w.size else np.zeros(0)
    return owner, w, picks


def min_step(xs, model: WeightModel, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """One draw of ``min_i X_i / T_i`` per output (``+inf`` for empty ``T``)."""
    n = len(xs) if n is None else n
    owner, w, picks = _resample(xs, model, n, rng)
    out = np.full(n, np.inf)
    np.minimum.at(out, owner, picks / w)
    return out


def sum_step(xs, model: WeightModel, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """One draw of ``sum_i T_i X_i`` per output (0 for empty ``T``)."""
    n = len(xs) if n is None else n
    owner, w, picks = _resample(xs, model, n, rng)
    return np.bincount(owner, weights=w * picks, minlength=n)


def ks_two_sample(a, b) -> float:
    """Largest gap between the two empirical CDFs; ``+inf`` is a shared top atom."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("samples contain NaN")
    z = np.concatenate([a, b])
    fa = np.searchsorted(a, z, side="right") / a.size
    fb = np.searchsorted(b, z, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n: int, m: int, level: float = 0.001) -> float:
    """Asymptotic two-sample critical value ``c(level) sqrt((n + m) / (n m))``."""
    c = math.sqrt(-math.log(level / 2) / 2)
    return c * math.sqrt((n + m) / (n * m))
