"""Reproduction laws ``T = (T_i)`` and their moment function ``m``.

A :class:`WeightModel` describes the law of one realization of the weight
sequence.  Zero weights never leave the sampler: a realization is the array
of its strictly positive entries, possibly empty (the extinction branch).

Three variants exist:

* ``deterministic`` -- one fixed sequence;
* ``mixture``       -- finitely many sequences chosen with given probabilities;
* ``iid``           -- a random count ``N`` followed by ``N`` i.i.d. weights.

``m(theta) = E sum_i T_i**theta`` is evaluated exactly whenever a closed form
is available (always for the two finite variants) and by Monte Carlo
otherwise.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import special

from . import rng as rngmod

DIVERGENCE_CAP = 1e12
HEAVY_TAIL_KURTOSIS = 100.0
_LATTICE_TOL = 1e-9


class ModelError(ValueError):
    """Raised for an ill-formed weight model or an invalid realization."""


# --------------------------------------------------------------------------
# laws


@dataclass(frozen=True)
class CountLaw:
    """Law of the number of children ``N`` for the ``iid`` variant."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        p = self.params
        if self.kind == "const":
            if int(p["n"]) < 0:
                raise ModelError("const count must be >= 0")
        elif self.kind == "poisson":
            if float(p["lam"]) < 0:
                raise ModelError("poisson rate must be >= 0")
        elif self.kind == "binomial":
            if int(p["n"]) < 0 or not 0 <= float(p["p"]) <= 1:
                raise ModelError("invalid binomial parameters")
        elif self.kind == "geometric":
            # number of failures before the first success, support {0, 1, ...}
            if not 0 < float(p["p"]) <= 1:
                raise ModelError("geometric p must lie in (0, 1]")
        elif self.kind == "pmf":
            probs = np.asarray(p["probs"], dtype=float)
            if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise ModelError("count pmf must be non-negative and sum to 1")
        else:
            raise ModelError(f"unknown count law {self.kind!r}")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.kind == "const":
            return np.full(size, int(p["n"]), dtype=np.int64)
        if self.kind == "poisson":
            return rng.poisson(float(p["lam"]), size).astype(np.int64)
        if self.kind == "binomial":
            return rng.binomial(int(p["n"]), float(p["p"]), size).astype(np.int64)
        if self.kind == "geometric":
            return rng.geometric(float(p["p"]), size).astype(np.int64) - 1
        probs = np.asarray(p["probs"], dtype=float)
        return rng.choice(probs.size, size=size, p=probs).astype(np.int64)

    def mean(self) -> float:
        p = self.params
        if self.kind == "const":
            return float(int(p["n"]))
        if self.kind == "poisson":
            return float(p["lam"])
        if self.kind == "binomial":
            return int(p["n"]) * float(p["p"])
        if self.kind == "geometric":
            q = float(p["p"])
            return (1 - q) / q
        probs = np.asarray(p["probs"], dtype=float)
        return float(np.dot(np.arange(probs.size), probs))

    def is_constant(self) -> bool:
        return self.kind == "const"

    def to_dict(self) -> dict:
        return {"dist": self.kind, **self.params}


@dataclass(frozen=True)
class WeightLaw:
    """Law of a single child weight for the ``iid`` variant.

    ``custom`` laws wrap a sampler ``fn(size, rng) -> array`` and carry no
    closed forms; they cannot be serialized.
    """

    kind: str
    params: dict = field(default_factory=dict)
    sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None

    def __post_init__(self) -> None:
        p = self.params
        if self.kind == "uniform":
            if not 0 <= float(p["low"]) < float(p["high"]):
                raise ModelError("uniform law needs 0 <= low < high")
        elif self.kind == "beta":
            if float(p["a"]) <= 0 or float(p["b"]) <= 0:
                raise ModelError("beta parameters must be positive")
        elif self.kind == "const":
            if float(p["value"]) <= 0:
                raise ModelError("constant weight must be positive")
        elif self.kind == "lognormal":
            if float(p["sigma"]) < 0:
                raise ModelError("lognormal sigma must be >= 0")
        elif self.kind == "discrete":
            vals = np.asarray(p["values"], dtype=float)
            probs = np.asarray(p["probs"], dtype=float)
            if vals.shape != probs.shape or np.any(vals <= 0):
                raise ModelError("discrete weight law needs positive values")
            if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise ModelError("discrete weight probabilities must sum to 1")
        elif self.kind == "custom":
            if self.sampler is None:
                raise ModelError("custom weight law needs a sampler")
        else:
            raise ModelError(f"unknown weight law {self.kind!r}")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.kind == "uniform":
            lo, hi = float(p["low"]), float(p["high"])
            # open at the lower end so that low = 0 never yields a zero weight
            return hi - (hi - lo) * rng.random(size)
        if self.kind == "beta":
            return rng.beta(float(p["a"]), float(p["b"]), size)
        if self.kind == "const":
            return np.full(size, float(p["value"]))
        if self.kind == "lognormal":
            return rng.lognormal(float(p["mu"]), float(p["sigma"]), size)
        if self.kind == "discrete":
            vals = np.asarray(p["values"], dtype=float)
            return vals[rng.choice(vals.size, size=size, p=np.asarray(p["probs"], dtype=float))]
        return np.asarray(self.sampler(size, rng), dtype=float)

    def moment(self, theta: float) -> float | None:
        """``E X**theta`` in closed form, or ``None``."""
        p = self.params
        if self.kind == "uniform":
            lo, hi = float(p["low"]), float(p["high"])
            return (hi ** (theta + 1) - lo ** (theta + 1)) / ((theta + 1) * (hi - lo))
        if self.kind == "beta":
            a, b = float(p["a"]), float(p["b"])
            return float(np.exp(special.betaln(a + theta, b) - special.betaln(a, b)))
        if self.kind == "const":
            return float(p["value"]) ** theta
        if self.kind == "lognormal":
            mu, s = float(p["mu"]), float(p["sigma"])
            return math.exp(theta * mu + 0.5 * (theta * s) ** 2)
        if self.kind == "discrete":
            vals = np.asarray(p["values"], dtype=float)
            return float(np.dot(np.asarray(p["probs"], dtype=float), vals**theta))
        return None

    def log_moment(self, theta: float) -> float | None:
        """``E X**theta log X`` in closed form, or ``None``."""
        p = self.params
        if self.kind == "uniform":
            lo, hi = float(p["low"]), float(p["high"])
            g = hi ** (theta + 1) - lo ** (theta + 1)
            dg = hi ** (theta + 1) * math.log(hi) - (lo ** (theta + 1) * math.log(lo) if lo > 0 else 0.0)
            h = (theta + 1) * (hi - lo)
            return dg / h - g * (hi - lo) / h**2
        if self.kind == "beta":
            a, b = float(p["a"]), float(p["b"])
            return self.moment(theta) * float(special.digamma(a + theta) - special.digamma(a + b + theta))
        if self.kind == "const":
            v = float(p["value"])
            return v**theta * math.log(v)
        if self.kind == "lognormal":
            mu, s = float(p["mu"]), float(p["sigma"])
            return (mu + theta * s * s) * self.moment(theta)
        if self.kind == "discrete":
            vals = np.asarray(p["values"], dtype=float)
            return float(np.dot(np.asarray(p["probs"], dtype=float), vals**theta * np.log(vals)))
        return None

    def below_one(self) -> bool | None:
        """Whether ``X < 1`` almost surely (``None`` when unknown)."""
        p = self.params
        if self.kind == "uniform":
            return float(p["high"]) <= 1.0
        if self.kind == "beta":
            return True
        if self.kind == "const":
            return float(p["value"]) < 1.0
        if self.kind == "lognormal":
            return False
        if self.kind == "discrete":
            vals = np.asarray(p["values"], dtype=float)[np.asarray(p["probs"]) > 0]
            return bool(np.all(vals < 1.0))
        return None

    def atoms(self) -> np.ndarray | None:
        """Support points of a purely atomic law."""
        if self.kind == "const":
            return np.array([float(self.params["value"])])
        if self.kind == "discrete":
            vals = np.asarray(self.params["values"], dtype=float)
            return vals[np.asarray(self.params["probs"]) > 0]
        return None

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ModelError("custom weight laws are not serializable")
        return {"dist": self.kind, **self.params}


# --------------------------------------------------------------------------
# exact m


@dataclass(frozen=True)
class ExactM:
    """Closed-form ``m`` and (optionally) ``m'``."""

    name: str
    m: Callable[[float], float]
    dm: Callable[[float], float] | None = None


def _uniform_pair(model: "WeightModel") -> ExactM:
    return ExactM("uniform-pair", lambda th: 2.0 / (th + 1.0), lambda th: -2.0 / (th + 1.0) ** 2)


def _iid_moments(model: "WeightModel") -> ExactM:
    if model.variant != "iid":
        raise ModelError("iid-moments applies to iid models only")
    en = model.count.mean()
    if model.weight.moment(0.0) is None:
        raise ModelError("weight law has no closed-form moments")
    return ExactM(
        "iid-moments",
        lambda th: en * model.weight.moment(th),
        lambda th: en * model.weight.log_moment(th),
    )


EXACT_M_BUILTINS: dict[str, Callable[["WeightModel"], ExactM]] = {
    "uniform-pair": _uniform_pair,
    "iid-moments": _iid_moments,
}


# --------------------------------------------------------------------------
# the model


def _in_lattice(values: np.ndarray, r: float) -> bool:
    k = np.log(values) / math.log(r)
    return bool(np.all(np.abs(k - np.round(k)) <= _LATTICE_TOL))


@dataclass(frozen=True, eq=False)
class WeightModel:
    variant: str
    atoms: tuple = ()
    count: CountLaw | None = None
    weight: WeightLaw | None = None
    lattice_span: float = 1.0
    exact_m_name: str | None = None
    exact_m_override: ExactM | None = None
    power: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.lattice_span < 1:
            raise ModelError("lattice_span must be >= 1")
        if self.power <= 0:
            raise ModelError("power must be positive")
        if self.variant in ("deterministic", "mixture"):
            if not self.atoms:
                raise ModelError("finite models need at least one atom")
            cleaned = []
            for prob, seq in self.atoms:
                arr = np.asarray(seq, dtype=float)
                if arr.ndim != 1 or np.any(~np.isfinite(arr)) or np.any(arr < 0):
                    raise ModelError("weights must be finite and non-negative")
                if prob < 0:
                    raise ModelError("mixture probabilities must be non-negative")
                cleaned.append((float(prob), tuple(float(x) for x in arr[arr > 0])))
            total = sum(p for p, _ in cleaned)
            if abs(total - 1.0) > 1e-12:
                raise ModelError(f"mixture probabilities sum to {total!r}, not 1")
            if self.variant == "deterministic" and len(cleaned) != 1:
                raise ModelError("deterministic models have exactly one atom")
            object.__setattr__(self, "atoms", tuple(cleaned))
            if self.lattice_span > 1:
                vals = self._base_values()
                if vals.size and not _in_lattice(vals, self.lattice_span):
                    raise ModelError(f"weights are not all in {self.lattice_span}^Z")
        elif self.variant == "iid":
            if self.count is None or self.weight is None:
                raise ModelError("iid models need a count law and a weight law")
            if self.lattice_span > 1 and self.weight.atoms() is not None:
                if not _in_lattice(self.weight.atoms(), self.lattice_span):
                    raise ModelError(f"weights are not all in {self.lattice_span}^Z")
        else:
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.exact_m_name is not None and self.exact_m_name not in EXACT_M_BUILTINS:
            raise ModelError(f"unknown exact_m {self.exact_m_name!r}")

    # constructors -------------------------------------------------------

    @classmethod
    def deterministic(cls, weights, lattice_span: float = 1.0, name: str = "") -> "WeightModel":
        return cls("deterministic", atoms=((1.0, tuple(weights)),), lattice_span=lattice_span, name=name)

    @classmethod
    def mixture(cls, atoms, lattice_span: float = 1.0, name: str = "") -> "WeightModel":
        return cls("mixture", atoms=tuple((p, tuple(w)) for p, w in atoms), lattice_span=lattice_span, name=name)

    @classmethod
    def iid(cls, count: CountLaw, weight: WeightLaw, lattice_span: float = 1.0,
            exact_m: str | ExactM | None = None, name: str = "") -> "WeightModel":
        if isinstance(exact_m, ExactM):
            return cls("iid", count=count, weight=weight, lattice_span=lattice_span,
                       exact_m_override=exact_m, name=name)
        return cls("iid", count=count, weight=weight, lattice_span=lattice_span,
                   exact_m_name=exact_m, name=name)

    def powered(self, alpha: float) -> "WeightModel":
        """The model of ``(T_i**alpha)``."""
        return WeightModel(
            self.variant, self.atoms, self.count, self.weight,
            lattice_span=self.lattice_span**alpha, exact_m_name=self.exact_m_name,
            exact_m_override=self.exact_m_override, power=self.power * alpha,
            name=f"{self.name}^{alpha:g}" if self.name else "",
        )

    # structure ----------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.variant in ("deterministic", "mixture")

    @property
    def is_deterministic(self) -> bool:
        return self.variant == "deterministic" or (
            self.variant == "mixture" and sum(1 for p, _ in self.atoms if p > 0) == 1
        )

    def _base_values(self) -> np.ndarray:
        vals = [w for p, seq in self.atoms if p > 0 for w in seq]
        return np.asarray(vals, dtype=float)

    def support_values(self) -> np.ndarray | None:
        """All weight values that occur with positive probability (finite models)."""
        if self.is_finite:
            return np.unique(self._base_values() ** self.power)
        atoms = self.weight.atoms()
        return None if atoms is None else np.unique(atoms**self.power)

    def mean_count(self) -> float:
        if self.is_finite:
            return float(sum(p * len(seq) for p, seq in self.atoms))
        return self.count.mean()

    def exact_m(self) -> ExactM | None:
        if self.exact_m_override is not None:
            base = self.exact_m_override
        elif self.exact_m_name is not None:
            base = EXACT_M_BUILTINS[self.exact_m_name](self)
        elif self.is_finite:
            return self._finite_exact()
        else:
            return None
        if self.power == 1.0:
            return base
        q = self.power
        dm = None if base.dm is None else (lambda th: q * base.dm(q * th))
        return ExactM(base.name, lambda th: base.m(q * th), dm)

    def _finite_exact(self) -> ExactM:
        atoms = [(p, np.asarray(seq, dtype=float) ** self.power) for p, seq in self.atoms if p > 0]

        def m(th: float) -> float:
            return float(sum(p * np.sum(w**th) for p, w in atoms))

        def dm(th: float) -> float:
            return float(sum(p * np.sum(w**th * np.log(w)) for p, w in atoms))

        return ExactM("atoms", m, dm)

    # sampling -----------------------------------------------------------

    def sample_many(self, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``k`` independent realizations of ``T``.

        Returns ``(counts, weights)``: ``counts[j]`` positive weights for
        realization ``j``, stored consecutively in ``weights``.
        """
        if self.is_finite:
            live = [(p, seq) for p, seq in self.atoms if p > 0]
            width = max((len(s) for _, s in live), default=0)
            table = np.zeros((len(live), width))
            for j, (_, seq) in enumerate(live):
                table[j, : len(seq)] = seq
            if len(live) == 1:
                rows = np.broadcast_to(table[0], (k, width))
            else:
                probs = np.array([p for p, _ in live])
                rows = table[rng.choice(len(live), size=k, p=probs / probs.sum())]
            mask = rows > 0
            counts = mask.sum(axis=1).astype(np.int64)
            weights = rows[mask]
        else:
            counts = self.count.sample(k, rng)
            weights = self.weight.sample(int(counts.sum()), rng)
            if weights.size and not (np.all(np.isfinite(weights)) and np.all(weights > 0)):
                raise ModelError("weight law produced a non-positive or non-finite value")
        if self.power != 1.0:
            weights = weights**self.power
        return counts, np.asarray(weights, dtype=float)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One realization of ``T`` with zeros removed (possibly empty)."""
        _, w = self.sample_many(1, rng)
        return w

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        if self.exact_m_override is not None:
            raise ModelError("models with a programmatic exact_m are not serializable")
        if self.variant == "deterministic":
            variant: Any = {"deterministic": list(self.atoms[0][1])}
        elif self.variant == "mixture":
            variant = {"mixture": [[p, list(seq)] for p, seq in self.atoms]}
        else:
            variant = {"iid": {"count": self.count.to_dict(), "weight": self.weight.to_dict()}}
        doc = {"variant": variant, "lattice_span": self.lattice_span}
        if self.exact_m_name is not None:
            doc["exact_m"] = self.exact_m_name
        if self.power != 1.0:
            doc["power"] = self.power
        if self.name:
            doc["name"] = self.name
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "WeightModel":
        allowed = {"variant", "lattice_span", "exact_m", "power", "name"}
        extra = set(doc) - allowed
        if extra:
            raise ModelError(f"unknown model fields: {sorted(extra)}")
        variant = doc["variant"]
        if not isinstance(variant, dict) or len(variant) != 1:
            raise ModelError("variant must be an object with exactly one key")
        (kind, body), = variant.items()
        common = dict(
            lattice_span=float(doc.get("lattice_span", 1.0)),
            exact_m_name=doc.get("exact_m"),
            power=float(doc.get("power", 1.0)),
            name=doc.get("name", ""),
        )
        if kind == "deterministic":
            return cls("deterministic", atoms=((1.0, tuple(body)),), **common)
        if kind == "mixture":
            return cls("mixture", atoms=tuple((float(p), tuple(w)) for p, w in body), **common)
        if kind == "iid":
            c = dict(body["count"])
            w = dict(body["weight"])
            return cls("iid", count=CountLaw(c.pop("dist"), c), weight=WeightLaw(w.pop("dist"), w), **common)
        raise ModelError(f"unknown variant {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "WeightModel":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        return f"WeightModel({self.name or self.variant})"


def sample(model: WeightModel, rng: np.random.Generator) -> np.ndarray:
    return model.sample(rng)


# --------------------------------------------------------------------------
# Monte Carlo moments


@dataclass
class Estimate:
    value: float
    stderr: float
    exact: bool
    diverged: bool = False


class TSample:
    """A fixed batch of realizations of ``T`` (common random numbers).

    Evaluating ``m`` at many exponents on the same batch gives a smooth,
    convex estimate, which is what root finding needs.
    """

    def __init__(self, counts: np.ndarray, weights: np.ndarray):
        self.counts = counts
        self.weights = weights
        self.owner = np.repeat(np.arange(counts.size), counts)
        self.logw = np.log(weights)

    @classmethod
    def draw(cls, model: WeightModel, budget: int, seed: int, workers: int = 1) -> "TSample":
        parts = rngmod.map_blocks(lambda n, g: model.sample_many(n, g), seed, budget, workers,
                                  block_size=4096)
        counts = np.concatenate([c for c, _ in parts]) if parts else np.zeros(0, np.int64)
        weights = np.concatenate([w for _, w in parts]) if parts else np.zeros(0)
        return cls(counts, weights)

    @property
    def size(self) -> int:
        return self.counts.size

    def per_sample(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.owner, weights=values, minlength=self.size)

    def sums(self, theta: float) -> np.ndarray:
        return self.per_sample(np.exp(theta * self.logw))

    def m(self, theta: float) -> Estimate:
        y = self.sums(theta)
        mean, se = rngmod.mean_stderr(y)
        running = np.cumsum(y) / np.arange(1, y.size + 1)
        diverged = bool(np.any(running > DIVERGENCE_CAP))
        return Estimate(math.inf if diverged else mean, se, exact=False, diverged=diverged)

    def m_prime(self, theta: float) -> Estimate:
        y = self.per_sample(np.exp(theta * self.logw) * self.logw)
        mean, se = rngmod.mean_stderr(y)
        return Estimate(mean, se, exact=False)

    def xlogx(self, alpha: float) -> tuple[Estimate, float]:
        """``E Y log+ Y`` for ``Y = sum_i T_i**alpha``, with the summand's kurtosis."""
        y = self.sums(alpha)
        z = y * np.log(np.maximum(y, 1.0))
        mean, se = rngmod.mean_stderr(z)
        sd = z.std()
        kurt = float(np.mean((z - z.mean()) ** 4) / sd**4) if sd > 0 else 0.0
        return Estimate(mean, se, exact=False), kurt


def m_eval(model: WeightModel, theta: float, budget: int = 100_000, seed: int = 0,
           exact: bool | None = None, workers: int = 1) -> Estimate:
    """Evaluate ``m(theta) = E sum_i T_i**theta``.

    ``exact=None`` uses the closed form when the model has one; ``False``
    forces Monte Carlo over ``budget`` realizations.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    em = model.exact_m()
    if em is not None and exact is not False:
        return Estimate(float(em.m(theta)), 0.0, exact=True)
    if exact:
        raise ModelError("model has no closed-form m")
    return TSample.draw(model, budget, seed, workers).m(theta)


def m_prime_eval(model: WeightModel, theta: float, budget: int = 100_000, seed: int = 0,
                 exact: bool | None = None, workers: int = 1) -> Estimate:
    """Evaluate ``m'(theta) = E sum_i T_i**theta log T_i``."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    em = model.exact_m()
    if em is not None and em.dm is not None and exact is not False:
        return Estimate(float(em.dm(theta)), 0.0, exact=True)
    if exact:
        raise ModelError("model has no closed-form m'")
    return TSample.draw(model, budget, seed, workers).m_prime(theta)


# --------------------------------------------------------------------------
# assumptions


@dataclass
class AssumptionReport:
    a1_holds: bool
    a2_holds: bool
    a3_alpha: float | None
    a4a_holds: bool
    a4b_holds: bool
    a5_holds: bool | None
    lattice_span: float
    evidence: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def a4_holds(self) -> bool:
        return self.a4a_holds or self.a4b_holds

    @property
    def regime(self) -> str:
        if self.a4a_holds and self.a4b_holds:
            return "both"
        if self.a4a_holds:
            return "A4a"
        if self.a4b_holds:
            return "A4b"
        return "undetermined"


def _a1(model: WeightModel) -> tuple[bool, str]:
    vals = model.support_values()
    if vals is not None:
        holds = bool(np.any(vals != 1.0))
        return holds, "exact: some weight differs from 1" if holds else "exact: every weight equals 1"
    return True, "continuous weight law puts no mass on {0, 1}"


def _a5(model: WeightModel) -> bool | None:
    vals = model.support_values()
    if vals is not None:
        return bool(np.all(vals < 1.0))
    return model.weight.below_one()


def check_assumptions(model: WeightModel, budget: int = 100_000, seed: int = 0,
                      theta_probe: float = 0.0, search_max: float = 16.0,
                      workers: int = 1) -> AssumptionReport:
    """Report the standing assumptions for ``model`` with their evidence."""
    from .exponent import AlphaInconclusive, AlphaNotBracketed, find_alpha

    evidence: dict = {}
    notes: list = []
    a1, why = _a1(model)
    evidence["a1"] = why
    en = model.mean_count()
    evidence["mean_count"] = en
    a2 = en > 1.0

    alpha = None
    a4a = a4b = False
    if a2:
        try:
            ce = find_alpha(model, search_max=search_max, budget=budget, seed=seed, workers=workers)
            alpha = ce.alpha
            evidence["alpha"] = ce.alpha
            evidence["m_prime_at_alpha"] = ce.m_prime_at_alpha
            evidence["m_prime_stderr"] = ce.m_prime_stderr
        except (AlphaNotBracketed, AlphaInconclusive) as exc:
            notes.append(f"alpha: {exc}")
    else:
        notes.append("E N <= 1: characteristic exponent not searched")

    if alpha is not None:
        sep = max(4 * evidence["m_prime_stderr"], 1e-9)
        slope_ok = evidence["m_prime_at_alpha"] < -sep
        moment_ok, why = xlogx_probe(model, alpha, budget, rngmod.derive_seed(seed, "xlogx"), workers)
        evidence["xlogx"] = why
        a4a = slope_ok and moment_ok
        if theta_probe >= alpha:
            notes.append("theta_probe must lie below alpha; A4b not assessed")
        else:
            est = m_eval(model, theta_probe, budget, rngmod.derive_seed(seed, "a4b"), workers=workers)
            evidence["m_at_theta_probe"] = est.value
            a4b = math.isfinite(est.value)
            if not est.exact:
                notes.append("A4b verdict is heuristic (Monte Carlo finiteness probe)")
    a5 = _a5(model)
    if a5 is None:
        notes.append("A5 unknown for this weight law")
    return AssumptionReport(a1, a2, alpha, a4a, a4b, a5, model.lattice_span, evidence, notes)


def xlogx_probe(model: WeightModel, alpha: float, budget: int = 100_000, seed: int = 0,
                workers: int = 1) -> tuple[bool, str]:
    """Probe ``E Y log+ Y < inf`` for ``Y = sum_i T_i**alpha``."""
    if model.is_finite:
        return True, "exact: finitely many bounded atoms"
    est, kurt = TSample.draw(model, budget, seed, workers).xlogx(alpha)
    if not math.isfinite(est.value):
        return False, "diverged"
    if kurt > HEAVY_TAIL_KURTOSIS:
        warnings.warn(f"x log x probe inconclusive: summand kurtosis {kurt:.3g}", stacklevel=2)
        return False, f"inconclusive: heavy tail (kurtosis {kurt:.3g})"
    return True, f"MC mean {est.value:.6g} +/- {est.stderr:.2g}"
