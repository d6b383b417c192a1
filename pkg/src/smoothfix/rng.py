"""Seeded random streams for Monte Carlo work.

Replications are grouped into fixed-size blocks; block ``k`` of a task draws
from its own generator derived from ``(master seed, tag, k)``.  The block
layout depends only on the replication count, so results are identical for
any number of workers.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK_SIZE = 256
SEED_MAX = 2**64 - 1

R = TypeVar("R")


def _tag_words(tag: str) -> tuple[int, ...]:
    digest = hashlib.sha256(tag.encode()).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


def derive_seed(seed: int, tag: str) -> int:
    """Deterministically derive an independent 64-bit seed for a sub-task."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=_tag_words(tag))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(check_seed(seed), spawn_key=key))


def blocks(reps: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """Split ``reps`` replications into consecutive ``(start, stop)`` blocks."""
    if reps < 0:
        raise ValueError("reps must be non-negative")
    return [(lo, min(lo + block_size, reps)) for lo in range(0, reps, block_size)]


def map_blocks(
    fn: Callable[[int, np.random.Generator], R],
    seed: int,
    reps: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list[R]:
    """Run ``fn(n_block, rng)`` on every block; results come back in block order.

    Block ``k`` always receives the generator keyed by ``k``, so the output
    does not depend on ``workers``.
    """
    parts = blocks(reps, block_size)
    jobs = [(hi - lo, generator(seed, k)) for k, (lo, hi) in enumerate(parts)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(n, g) for n, g in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def mean_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))
