from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import settings

from smoothfix import fleet
from smoothfix.martingales import sample_limit_W

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# independent scalar-bisection root of 0.2**a + 0.5 * 1.2**a = 1
STRADDLE_ALPHA = 0.4918938277403542

SEED_A = 20240611
SEED_B = 977

_ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _timed(model, alpha, depth, seed):
    t0 = time.perf_counter()
    w = sample_limit_W(model, alpha, depth, 10_000, seed=seed)
    w.meta["build_seconds"] = time.perf_counter() - t0
    return w


@pytest.fixture(scope="session")
def uniform_w():
    """Depth-14 limit samples for the uniform pair, first seed."""
    return _timed(fleet.uniform_pair(), 1.0, 14, SEED_A)


@pytest.fixture(scope="session")
def uniform_w_b():
    return _timed(fleet.uniform_pair(), 1.0, 14, SEED_B)


@pytest.fixture(scope="session")
def straddle_w():
    return _timed(fleet.straddle_mixture(), STRADDLE_ALPHA, 18, SEED_A)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
