"""Additive and multiplicative martingales on the weighted tree.

Includes samples of the limit ``W`` and the on-tree endogeny residual.
"""
from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng as rngmod
from .tree import MAX_NODES, Front, log_sum_exp_per_tree, root_front, _spawn
from .weights import WeightModel

CAP_WARN_FRACTION = 0.01
ROUNDING_FLOOR = 1e-10  # two summation orders over ~1e6 terms differ by ~1e-11


class ContractViolation(ValueError):
    pass


class CacheError(RuntimeError):
    pass


def additive_value(front: Front, theta: float) -> float | np.ndarray:
    """``sum_v L(v)**theta`` over the front; per tree for forests."""
    if theta == 0:
        vals = np.bincount(front.tree, minlength=front.n_trees).astype(float)
    else:
        vals = np.exp(log_sum_exp_per_tree(front, theta))
    return float(vals[0]) if front.n_trees == 1 else vals


def multiplicative_value(front: Front, f: Callable[[np.ndarray], np.ndarray],
                         t: float) -> float | np.ndarray:
    """``prod_v f(t L(v))`` over the front, accumulated in log space."""
    vals = np.asarray(f(t * front.L), dtype=float)
    if vals.size and (np.any(~(vals >= 0.0)) or np.any(vals > 1.0)):
        raise ContractViolation("f must map into [0, 1]")
    with np.errstate(divide="ignore"):
        logs = np.log(vals)
    # bincount cannot add -inf, so zero factors are tracked separately
    zero = vals == 0.0
    acc = np.bincount(front.tree[~zero], weights=logs[~zero], minlength=front.n_trees)
    dead = np.bincount(front.tree[zero], minlength=front.n_trees) > 0
    out = np.where(dead, 0.0, np.exp(acc))
    return float(out[0]) if front.n_trees == 1 else out


# --------------------------------------------------------------------------
# samples of the limit


@dataclass
class EmpiricalW:
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float)
        if np.any(self.samples < 0) or np.any(np.isnan(self.samples)):
            raise ValueError("W samples must be non-negative")

    @property
    def reps(self) -> int:
        return self.samples.size

    def mean_stderr(self) -> tuple[float, float]:
        return rngmod.mean_stderr(self.samples)

    def scaled(self, c: float) -> "EmpiricalW":
        return EmpiricalW(self.samples * c, {**self.meta, "scale": c * self.meta.get("scale", 1.0)})

    @classmethod
    def constant(cls, value: float = 1.0) -> "EmpiricalW":
        return cls(np.array([float(value)]), {"constant": float(value)})

    # persistence ----------------------------------------------------------

    def checksum(self) -> str:
        return hashlib.sha256(_csv_bytes(self.samples)).hexdigest()

    def cache_name(self) -> str:
        key = json.dumps({k: self.meta.get(k) for k in ("model", "alpha", "depth", "eps", "seed", "reps")},
                         sort_keys=True)
        return "w-" + hashlib.sha256(key.encode()).hexdigest()[:16]

    def save(self, directory, overwrite: bool = False) -> Path:
        """Write ``<name>.csv`` and ``<name>.json``; returns the CSV path.

        An existing cache with the same name is left alone when its checksum
        matches and refused otherwise (unless ``overwrite``).
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / (self.cache_name() + ".csv")
        body = _csv_bytes(self.samples)
        digest = hashlib.sha256(body).hexdigest()
        if path.exists() and not overwrite:
            if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
                raise CacheError(f"{path} exists with a different checksum; use overwrite")
            return path
        path.write_bytes(body)
        sidecar = {**self.meta, "sha256": digest}
        path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "EmpiricalW":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        body = path.read_bytes()
        if hashlib.sha256(body).hexdigest() != meta.get("sha256"):
            raise CacheError(f"checksum mismatch for {path}")
        rows = list(csv.reader(body.decode().splitlines()))
        samples = np.array([float(r[0]) for r in rows[1:]])
        meta = {k: v for k, v in meta.items() if k != "sha256"}
        return cls(samples, meta)


def _csv_bytes(samples: np.ndarray) -> bytes:
    return ("W\n" + "".join(repr(float(x)) + "\n" for x in samples)).encode()


def _grow_W(model: WeightModel, alpha: float, depth: int, n: int, rng: np.random.Generator,
            eps: float, max_nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``W_depth`` for ``n`` trees; trees hitting the node cap are frozen.

    Returns the values, the leaked mass and a capped flag per tree.
    """
    S = np.zeros(n)
    tree = np.arange(n)
    leaked = np.zeros(n)
    frozen = np.full(n, np.nan)
    for _ in range(depth):
        ch = _spawn(model, S, rng)
        S, tree = ch.S, tree[ch.parent]
        if eps > 0:
            mass = np.exp(-alpha * S)
            drop = mass < eps
            leaked += np.bincount(tree[drop], weights=mass[drop], minlength=n)
            S, tree = S[~drop], tree[~drop]
        if S.size <= max_nodes:
            continue
        over = np.bincount(tree, minlength=n) > max_nodes
        if over.any():
            # freeze the tree at the value of the generation that hit the cap
            sel = over[tree]
            frozen[over] = np.bincount(tree[sel], weights=np.exp(-alpha * S[sel]), minlength=n)[over]
            keep = ~sel
            S, tree = S[keep], tree[keep]
    values = np.bincount(tree, weights=np.exp(-alpha * S), minlength=n)
    capped = ~np.isnan(frozen)
    values[capped] = frozen[capped]
    return values, leaked, capped


def sample_limit_W(model: WeightModel, alpha: float, depth: int, reps: int, seed: int = 0,
                   eps: float = 0.0, workers: int = 1, max_nodes: int = MAX_NODES,
                   model_id: str | None = None) -> EmpiricalW:
    """``reps`` independent realizations of ``W_depth`` (approximating ``W``)."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if reps < 1:
        raise ValueError("reps must be positive")
    parts = rngmod.map_blocks(
        lambda k, g: _grow_W(model, alpha, depth, k, g, eps, max_nodes), seed, reps, workers
    )
    values = np.concatenate([p[0] for p in parts])
    leaked = np.concatenate([p[1] for p in parts])
    capped = np.concatenate([p[2] for p in parts])
    meta = {
        "model": model_id if model_id is not None else model.to_json(),
        "alpha": alpha, "depth": depth, "eps": eps, "seed": seed, "reps": reps,
        "leaked_mean": float(leaked.mean()), "capped_fraction": float(capped.mean()),
        "cap_warning": bool(capped.mean() > CAP_WARN_FRACTION),
    }
    if meta["cap_warning"]:
        warnings.warn(f"node cap hit in {capped.mean():.1%} of replications", stacklevel=2)
    return EmpiricalW(values, meta)


def additive_path(model: WeightModel, alpha: float, depths, reps: int, seed: int = 0,
                  workers: int = 1) -> dict[int, np.ndarray]:
    """``W_n`` at every requested ``n``, all read off the same trees."""
    depths = sorted(set(int(d) for d in depths))

    def block(k: int, g: np.random.Generator) -> dict[int, np.ndarray]:
        front = root_front(k, track_paths=False)
        out = {}
        for n in range(depths[-1] + 1):
            if n in depths:
                out[n] = np.exp(log_sum_exp_per_tree(front, alpha))
            if n < depths[-1]:
                ch = _spawn(model, front.S, g)
                front = Front(ch.S, front.tree[ch.parent], front.generation[ch.parent] + 1,
                              k, "generation", n + 1)
        return out

    parts = rngmod.map_blocks(block, seed, reps, workers)
    return {n: np.concatenate([p[n] for p in parts]) for n in depths}


# --------------------------------------------------------------------------
# endogeny


@dataclass
class EndogenyResult:
    residuals: np.ndarray
    leaked: np.ndarray

    @property
    def mean_abs(self) -> float:
        return float(np.mean(self.residuals))

    @property
    def stderr(self) -> float:
        return rngmod.mean_stderr(self.residuals)[1]

    @property
    def within_leak(self) -> bool:
        return bool(np.all(self.residuals <= self.leaked + ROUNDING_FLOOR))


def _endogeny_block(model: WeightModel, alpha: float, n: int, total: int, k: int,
                    rng: np.random.Generator, eps: float) -> tuple[np.ndarray, np.ndarray]:
    S = np.zeros(k)
    tree = np.arange(k)
    anc = np.arange(k)  # index of the generation-n ancestor
    anc_S = np.zeros(k)
    anc_tree = np.arange(k)
    leaked = np.zeros(k)
    for g in range(1, total + 1):
        ch = _spawn(model, S, rng)
        S, tree, anc = ch.S, tree[ch.parent], anc[ch.parent]
        if eps > 0:
            mass = np.exp(-alpha * S)
            drop = mass < eps
            leaked += np.bincount(tree[drop], weights=mass[drop], minlength=k)
            S, tree, anc = S[~drop], tree[~drop], anc[~drop]
        if g == n:
            anc = np.arange(S.size)
            anc_S, anc_tree = S.copy(), tree.copy()
    root = np.bincount(tree, weights=np.exp(-alpha * S), minlength=k)
    # subtree estimate at each split vertex v, relative to v itself
    sub = np.bincount(anc, weights=np.exp(-alpha * (S - anc_S[anc])), minlength=anc_S.size)
    recomb = np.bincount(anc_tree, weights=np.exp(-alpha * anc_S) * sub, minlength=k)
    return np.abs(root - recomb), leaked


def endogeny_residual(model: WeightModel, alpha: float, split_gen: int, total_depth: int,
                      reps: int, seed: int = 0, eps: float = 0.0, workers: int = 1) -> EndogenyResult:
    """Compare ``W_{n+k}`` with ``sum_{|v|=n} L(v)**alpha [W_k]_v`` on one tree.

    Both sides are read off the same pruned tree, so they agree up to
    rounding; pruning only biases both sides together and the per-replica
    leaked mass bounds that bias.
    """
    if total_depth <= split_gen:
        raise ValueError("total_depth must exceed split_gen")
    parts = rngmod.map_blocks(
        lambda k, g: _endogeny_block(model, alpha, split_gen, total_depth, k, g, eps), seed, reps, workers
    )
    return EndogenyResult(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
