"""Reference weight models used throughout the tests and example configs."""
from __future__ import annotations

from .weights import CountLaw, WeightLaw, WeightModel


def binary_half() -> WeightModel:
    """Two children of weight 1/2: ``alpha = 1`` and ``W = 1``."""
    return WeightModel.deterministic([0.5, 0.5], lattice_span=2.0, name="binary-half")


def ternary_third() -> WeightModel:
    """Three children of weight 1/3: ``alpha = 1``, lattice span 3."""
    return WeightModel.deterministic([1 / 3, 1 / 3, 1 / 3], lattice_span=3.0, name="ternary-third")


def uniform_pair() -> WeightModel:
    """Two i.i.d. uniform weights: ``m(theta) = 2 / (theta + 1)``."""
    return WeightModel.iid(
        CountLaw("const", {"n": 2}), WeightLaw("uniform", {"low": 0.0, "high": 1.0}),
        exact_m="uniform-pair", name="uniform-pair",
    )


def straddle_atom() -> WeightModel:
    """The single sequence ``(0.2, 1.2)``; ``m > 1`` everywhere, so it has no exponent."""
    return WeightModel.mixture([(1.0, [0.2, 1.2])], name="straddle-atom")


def straddle_mixture() -> WeightModel:
    """``(0.2, 1.2)`` or ``(0.2,)`` with equal odds: one weight above 1, a finite exponent."""
    return WeightModel.mixture([(0.5, [0.2, 1.2]), (0.5, [0.2])], name="straddle-mixture")


def balanced_mixture() -> WeightModel:
    """``(1/2, 1/2)`` or ``(1/4, 3/4)``: ``sum_i T_i = 1`` surely, so spine weights are 1."""
    return WeightModel.mixture([(0.5, [0.5, 0.5]), (0.5, [0.25, 0.75])], name="balanced-mixture")


FLEET = {
    "binary-half": binary_half,
    "ternary-third": ternary_third,
    "uniform-pair": uniform_pair,
    "straddle-mixture": straddle_mixture,
}

NAMED = {**FLEET, "straddle-atom": straddle_atom, "balanced-mixture": balanced_mixture}
