"""Characteristic exponent: the smallest root of ``m(alpha) = 1``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .weights import ModelError, TSample, WeightModel, m_eval, xlogx_probe
from . import rng as rngmod

SEARCH_MAX = 16.0
GRID_POINTS = 64
SEPARATION = 4.0  # stderr multiples needed to call m'(alpha) negative


class AlphaNotBracketed(RuntimeError):
    pass


class AlphaInconclusive(RuntimeError):
    pass


@dataclass
class CharacteristicExponent:
    alpha: float
    m_prime_at_alpha: float
    m_prime_stderr: float
    regime: str
    solver_tolerance: float
    exact: bool
    alpha_stderr: float = 0.0


def _scan_grid(search_max: float, points: int) -> np.ndarray:
    # log-spaced so that small exponents are resolved as well as large ones
    return np.concatenate([[0.0], np.geomspace(search_max * 2.0**-16, search_max, points)])


def _bisect(m: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    for _ in range(400):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if m(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_alpha(model: WeightModel, search_max: float = SEARCH_MAX, tol: float = 1e-12,
               budget: int = 100_000, seed: int = 0, grid_points: int = GRID_POINTS,
               workers: int = 1) -> CharacteristicExponent:
    """Smallest crossing of ``m(theta) = 1`` on ``(0, search_max]``.

    Models without a closed-form ``m`` are solved on one fixed batch of
    ``budget`` realizations, so the estimated ``m`` is itself convex and the
    bisection is well defined; the sampling error of the root is reported in
    ``alpha_stderr``.
    """
    if search_max <= 0:
        raise ValueError("search_max must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    en = model.mean_count()
    if en <= 1.0:
        raise ModelError(f"E N = {en!r} <= 1; no characteristic exponent")

    em = model.exact_m()
    if em is not None:
        m = em.m
        sample = None
    else:
        sample = TSample.draw(model, budget, seed, workers)
        m = lambda th: sample.m(th).value  # noqa: E731

    grid = _scan_grid(search_max, grid_points)
    prev = grid[0]
    bracket = None
    for th in grid[1:]:
        v = m(th)
        if math.isfinite(v) and v <= 1.0:
            bracket = (prev, th)
            break
        prev = th
    if bracket is None:
        raise AlphaNotBracketed(
            f"alpha not bracketed: m(theta) > 1 on (0, {search_max:g}]; raise search_max"
        )
    alpha = float(_bisect(m, bracket[0], bracket[1], tol))

    if sample is None:
        dm = em.dm(alpha) if em.dm is not None else _numeric_slope(em.m, alpha)
        return CharacteristicExponent(alpha, float(dm), 0.0, _slope_regime(dm, 0.0), tol, True)

    slope = sample.m_prime(alpha)
    level = sample.m(alpha)
    if abs(slope.value) <= SEPARATION * slope.stderr:
        raise AlphaInconclusive(
            f"inconclusive at budget {budget}: m'(alpha) = {slope.value:.3g} +/- {slope.stderr:.2g}"
        )
    return CharacteristicExponent(
        alpha, slope.value, slope.stderr, _slope_regime(slope.value, slope.stderr), tol, False,
        alpha_stderr=level.stderr / abs(slope.value),
    )


def _numeric_slope(m: Callable[[float], float], x: float, h: float = 1e-6) -> float:
    return (m(x + h) - m(max(x - h, 0.0))) / (x + h - max(x - h, 0.0))


def _slope_regime(dm: float, se: float) -> str:
    # slope alone; the full verdict needs the moment probes in classify_regime
    return "A4a" if dm < -max(SEPARATION * se, 1e-9) else "undetermined"


def classify_regime(model: WeightModel, ce: CharacteristicExponent, theta_probe: float = 0.0,
                    budget: int = 100_000, seed: int = 0, workers: int = 1) -> str:
    """Tag the regime as ``A4a``, ``A4b``, ``both`` or ``undetermined``."""
    if not 0 <= theta_probe < ce.alpha:
        raise ValueError("theta_probe must lie in [0, alpha)")
    a4a = ce.m_prime_at_alpha < -max(SEPARATION * ce.m_prime_stderr, 1e-9)
    if a4a:
        a4a, _ = xlogx_probe(model, ce.alpha, budget, rngmod.derive_seed(seed, "xlogx"), workers)
    est = m_eval(model, theta_probe, budget, rngmod.derive_seed(seed, "a4b"), workers=workers)
    a4b = math.isfinite(est.value)
    if a4a and a4b:
        return "both"
    if a4a:
        return "A4a"
    if a4b:
        return "A4b"
    return "undetermined"


def shape_check(model: WeightModel, alpha: float, points: int = 32) -> bool:
    """Whether ``m > 1`` on an evenly spaced grid in ``[0, alpha)``."""
    em = model.exact_m()
    if em is None:
        raise ModelError("shape check needs a closed-form m")
    grid = np.linspace(0.0, alpha, points, endpoint=False)
    return bool(min(em.m(b) for b in grid) > 1.0)
