"""Monte Carlo and numerical checks for fixed points of the smoothing transform."""
from __future__ import annotations

__version__ = "0.1.0"

from .exponent import CharacteristicExponent, classify_regime, find_alpha
from .martingales import EmpiricalW, additive_value, endogeny_residual, multiplicative_value, sample_limit_W
from .solutions import GridFunction, PeriodicH, SolutionSpec, eval_f, residual, smoothing_map
from .tree import Front, first_exit_front, generation_front, ladder_front, sup_weight
from .weights import CountLaw, WeightLaw, WeightModel, check_assumptions, m_eval, m_prime_eval

__all__ = [
    "CharacteristicExponent", "CountLaw", "EmpiricalW", "Front", "GridFunction", "PeriodicH",
    "SolutionSpec", "WeightLaw", "WeightModel", "additive_value", "check_assumptions",
    "classify_regime", "endogeny_residual", "eval_f", "find_alpha", "first_exit_front",
    "generation_front", "ladder_front", "m_eval", "m_prime_eval", "multiplicative_value",
    "residual", "sample_limit_W", "smoothing_map", "sup_weight",
]
