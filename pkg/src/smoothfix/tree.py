"""Weighted branching trees grown generation by generation.

Nodes are stored column-wise: position ``S = -log L``, owning tree, and
generation, optionally with Ulam-Harris paths (1-based child indices,
zero-padded on the right) and a per-step trace of ``-log T``.  A front may
hold many independent trees at once; rows are grouped by tree.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .weights import WeightModel

MAX_GENERATION = 64
MAX_NODES = 10**7


class PopulationCapExceeded(RuntimeError):
    """A generation would exceed the node cap.

    ``front`` is the last complete front and ``attempted`` the size of the
    generation that was refused.
    """

    def __init__(self, front: "Front", attempted: int, cap: int):
        super().__init__(f"population cap exceeded: {attempted} nodes > {cap}")
        self.front = front
        self.attempted = attempted
        self.cap = cap


@dataclass(frozen=True)
class Prune:
    """Drop children whose ``L**alpha`` falls below ``eps``."""

    alpha: float
    eps: float = 0.0


@dataclass(frozen=True)
class Caps:
    max_generation: int = MAX_GENERATION
    max_nodes: int = MAX_NODES


@dataclass
class Front:
    S: np.ndarray
    tree: np.ndarray
    generation: np.ndarray
    n_trees: int
    kind: str
    level: float
    alpha: float | None = None
    leaked: np.ndarray | None = None
    paths: np.ndarray | None = None
    steps: np.ndarray | None = None
    capped: bool = False

    def __post_init__(self) -> None:
        if self.leaked is None:
            self.leaked = np.zeros(self.n_trees)

    @property
    def size(self) -> int:
        return self.S.size

    @property
    def leaked_mass(self) -> float:
        return float(self.leaked.sum())

    @property
    def L(self) -> np.ndarray:
        return np.exp(-self.S)

    def per_tree_sum(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.tree, weights=values, minlength=self.n_trees)

    def per_tree_max(self, values: np.ndarray, empty: float = 0.0) -> np.ndarray:
        out = np.full(self.n_trees, empty)
        np.maximum.at(out, self.tree, values)
        return out

    def path_strings(self) -> list[str]:
        if self.paths is None:
            raise ValueError("front was built without paths")
        return [".".join(str(int(k)) for k in row[row > 0]) for row in self.paths]

    def is_antichain(self) -> bool:
        """Structural check: no vertex is a proper prefix of another one."""
        if self.paths is None:
            raise ValueError("front was built without paths")
        seen = set()
        for t, row in zip(self.tree, self.paths):
            seen.add((int(t), tuple(int(k) for k in row[row > 0])))
        for t, p in seen:
            for j in range(len(p)):
                if (t, p[:j]) in seen:
                    return False
        return True

    def to_csv(self, path, alpha: float | None = None) -> None:
        a = self.alpha if alpha is None else alpha
        if a is None:
            raise ValueError("alpha needed for the L_alpha_mass column")
        names = self.path_strings()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = ["vertex_path", "generation", "S", "L_alpha_mass"]
            if self.n_trees > 1:
                cols.insert(0, "tree")
            w.writerow(cols)
            for i in range(self.size):
                row = [names[i], int(self.generation[i]), repr(float(self.S[i])),
                       repr(float(math.exp(-a * self.S[i])))]
                if self.n_trees > 1:
                    row.insert(0, int(self.tree[i]))
                w.writerow(row)


def root_front(n_trees: int = 1, track_paths: bool = True, debug: bool = False,
               alpha: float | None = None) -> Front:
    return Front(
        S=np.zeros(n_trees), tree=np.arange(n_trees, dtype=np.int64),
        generation=np.zeros(n_trees, dtype=np.int32), n_trees=n_trees,
        kind="generation", level=0, alpha=alpha,
        paths=np.zeros((n_trees, 0), dtype=np.int32) if track_paths else None,
        steps=np.zeros((n_trees, 0)) if debug else None,
    )


@dataclass
class _Children:
    parent: np.ndarray
    S: np.ndarray
    step: np.ndarray
    counts: np.ndarray

    @property
    def index(self) -> np.ndarray:
        """1-based child index within its parent."""
        starts = np.cumsum(self.counts) - self.counts
        return (np.arange(self.S.size) - np.repeat(starts, self.counts) + 1).astype(np.int32)


def _spawn(model: WeightModel, S: np.ndarray, rng: np.random.Generator) -> _Children:
    counts, w = model.sample_many(S.size, rng)
    parent = np.repeat(np.arange(S.size), counts)
    step = -np.log(w)
    return _Children(parent, S[parent] + step, step, counts)


def _extend(mat: np.ndarray | None, parent: np.ndarray, col: np.ndarray) -> np.ndarray | None:
    if mat is None:
        return None
    return np.concatenate([mat[parent], col[:, None].astype(mat.dtype)], axis=1)


def expand(front: Front, model: WeightModel, rng: np.random.Generator,
           prune: Prune | None = None, max_nodes: int = MAX_NODES) -> Front:
    """Next generation of a generation front."""
    if front.kind != "generation":
        raise ValueError("expand needs a generation front")
    ch = _spawn(model, front.S, rng)
    tree = front.tree[ch.parent]
    leaked = front.leaked.copy()
    keep = slice(None)
    alpha = front.alpha
    if prune is not None and prune.eps > 0:
        alpha = prune.alpha
        mass = np.exp(-prune.alpha * ch.S)
        drop = mass < prune.eps
        if drop.any():
            leaked += np.bincount(tree[drop], weights=mass[drop], minlength=front.n_trees)
            keep = ~drop
    S = ch.S[keep]
    tree = tree[keep]
    per_tree = np.bincount(tree, minlength=front.n_trees).max(initial=0)
    if per_tree > max_nodes:
        raise PopulationCapExceeded(front, int(per_tree), max_nodes)
    parent = ch.parent[keep]
    index = ch.index[keep] if front.paths is not None else None
    return Front(
        S=S, tree=tree, generation=front.generation[parent] + 1, n_trees=front.n_trees,
        kind="generation", level=front.level + 1, alpha=alpha, leaked=leaked,
        paths=_extend(front.paths, parent, index),
        steps=_extend(front.steps, parent, ch.step[keep]),
    )


def generation_front(model: WeightModel, n: int, rng: np.random.Generator,
                     prune: Prune | None = None, n_trees: int = 1, track_paths: bool = True,
                     max_nodes: int = MAX_NODES, debug: bool = False) -> Front:
    """Generation ``n`` of ``n_trees`` independent trees."""
    if n < 0:
        raise ValueError("n must be >= 0")
    front = root_front(n_trees, track_paths, debug, alpha=None if prune is None else prune.alpha)
    for _ in range(n):
        front = expand(front, model, rng, prune, max_nodes)
    return front


def _pad(mats: list[np.ndarray]) -> np.ndarray:
    width = max(m.shape[1] for m in mats)
    return np.concatenate([np.pad(m, ((0, 0), (0, width - m.shape[1]))) for m in mats])


def first_exit_front(model: WeightModel, t: float, rng: np.random.Generator,
                     alpha: float | None = None, caps: Caps = Caps(), n_trees: int = 1,
                     track_paths: bool = True, debug: bool = False,
                     kind: str = "first_exit") -> Front:
    """Stop every line of descent at its first vertex with ``S > t``.

    Lines still at or below ``t`` after ``caps.max_generation`` generations,
    or alive when the node cap is reached, are cut; their ``L**alpha`` mass is
    recorded as leaked (NaN if ``alpha`` is not given) and ``capped`` is set.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    live = root_front(n_trees, track_paths, debug, alpha)
    stopped: list[Front] = []
    total = 0
    capped = False
    leaked = np.zeros(n_trees)
    for _ in range(caps.max_generation):
        if live.size == 0:
            break
        nxt = expand(live, model, rng)
        out = nxt.S > t
        if out.any():
            stopped.append(_select(nxt, out))
            total += int(out.sum())
        live = _select(nxt, ~out)
        if live.size and total + live.size > caps.max_nodes:
            capped = True
            break
    if live.size:
        capped = True
        mass = np.exp(-alpha * live.S) if alpha is not None else np.full(live.size, np.nan)
        leaked += np.bincount(live.tree, weights=mass, minlength=n_trees)
    if not stopped:
        stopped.append(_select(live, np.zeros(live.size, dtype=bool)))
    S = np.concatenate([f.S for f in stopped])
    tree = np.concatenate([f.tree for f in stopped])
    gen = np.concatenate([f.generation for f in stopped])
    paths = _pad([f.paths for f in stopped]) if track_paths else None
    steps = _pad([f.steps for f in stopped]) if debug else None
    order = np.argsort(tree, kind="stable")
    return Front(
        S=S[order], tree=tree[order], generation=gen[order], n_trees=n_trees, kind=kind,
        level=t, alpha=alpha, leaked=leaked,
        paths=None if paths is None else paths[order],
        steps=None if steps is None else steps[order], capped=capped,
    )


def ladder_front(model: WeightModel, rng: np.random.Generator, alpha: float | None = None,
                 caps: Caps = Caps(), n_trees: int = 1, track_paths: bool = True,
                 debug: bool = False) -> Front:
    """First vertex with ``L < 1`` on every line of descent."""
    return first_exit_front(model, 0.0, rng, alpha, caps, n_trees, track_paths, debug, kind="ladder")


def _select(front: Front, mask: np.ndarray) -> Front:
    return replace(
        front, S=front.S[mask], tree=front.tree[mask], generation=front.generation[mask],
        paths=None if front.paths is None else front.paths[mask],
        steps=None if front.steps is None else front.steps[mask],
        leaked=np.zeros(front.n_trees),
    )


def sup_weight(front: Front) -> float | np.ndarray:
    """Largest ``L(v)`` on the front (0 when empty); per tree for forests."""
    per = front.per_tree_max(front.L)
    return float(per[0]) if front.n_trees == 1 else per


def log_sum_exp_per_tree(front: Front, theta: float) -> np.ndarray:
    """``log sum exp(-theta * S)`` per tree, ``-inf`` for empty trees."""
    x = -theta * front.S
    top = np.full(front.n_trees, -np.inf)
    np.maximum.at(top, front.tree, x)
    shift = np.where(np.isfinite(top), top, 0.0)
    acc = np.bincount(front.tree, weights=np.exp(x - shift[front.tree]), minlength=front.n_trees)
    with np.errstate(divide="ignore"):
        return np.log(acc) + shift
