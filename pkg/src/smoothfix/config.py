"""Strict experiment configuration documents for the command-line runner."""
from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import fleet
from .rng import SEED_MAX
from .weights import WeightModel


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Grid(Strict):
    lo: float = Field(1e-3, gt=0)
    hi: float = Field(10.0, gt=0)
    points: int = Field(30, ge=1)


class HDoc(Strict):
    """Either ``constant``, explicit grid ``values`` or a sine-shaped factor."""

    constant: Optional[float] = Field(None, gt=0)
    span: Optional[float] = Field(None, gt=1)
    values: Optional[list[float]] = None
    sine_amplitude: Optional[float] = Field(None, ge=0, lt=1)
    points: int = Field(32, ge=1)


class WSource(Strict):
    """``constant`` W, or samples at ``depth`` with ``reps`` (cached)."""

    constant: Optional[float] = Field(None, ge=0)
    depth: int = Field(12, ge=0)
    reps: int = Field(10_000, ge=1)
    eps: float = Field(0.0, ge=0)


class Base(Strict):
    model: Union[str, dict]
    seed: int = Field(ge=0, le=SEED_MAX)
    output_dir: Optional[str] = None
    alpha: Optional[float] = Field(None, gt=0)
    budget: int = Field(100_000, ge=1)

    @field_validator("model")
    @classmethod
    def _model_ok(cls, v):
        build_model(v)
        return v


class CheckModel(Base):
    task: Literal["check-model"]
    theta_probe: float = Field(0.0, ge=0)
    search_max: float = Field(16.0, gt=0)


class FindAlpha(Base):
    task: Literal["find-alpha"]
    search_max: float = Field(16.0, gt=0)
    tol: float = Field(1e-12, gt=0)
    expected: Optional[float] = None
    tolerance: float = Field(1e-10, gt=0)


class Simulate(Base):
    task: Literal["simulate"]
    front: Literal["generation", "first_exit", "ladder"] = "generation"
    n: int = Field(3, ge=0)
    t: float = Field(0.0, ge=0)
    eps: float = Field(0.0, ge=0)
    max_generation: int = Field(64, ge=1)
    max_nodes: int = Field(10**7, ge=1)


class SampleW(Base):
    task: Literal["sample-w"]
    w: WSource = WSource()
    z_max: float = Field(4.0, gt=0)


class VerifyFixedPoint(Base):
    task: Literal["verify-fixed-point"]
    h: HDoc = HDoc(constant=1.0)
    w: WSource = WSource(constant=1.0)
    grid: Grid = Grid()
    reps: int = Field(10_000, ge=1)
    sup_max: float = Field(0.01, ge=0)
    z_max: float = Field(4.0, gt=0)


class VerifyIdentities(Base):
    task: Literal["verify-identities"]
    ns: list[int] = [1, 5, 8]
    gs: list[Literal["one", "exp", "min3"]] = ["one", "exp", "min3"]
    tree_reps: int = Field(10_000, ge=2)
    spine_reps: int = Field(10_000, ge=2)
    ladder: bool = False
    z_max: float = Field(4.0, gt=0)
    leak_max: float = Field(1e-3, ge=0)


class RecursionTest(Base):
    task: Literal["recursion-test"]
    h: HDoc = HDoc(constant=1.0)
    w: WSource = WSource(constant=1.0)
    n: int = Field(10_000, ge=2)
    level: float = Field(0.001, gt=0, lt=1)
    sum_check: bool = True
    z_max: float = Field(4.0, gt=0)


class Diagnostics(Base):
    task: Literal["diagnostics"]
    h: HDoc = HDoc(constant=1.0)
    w: WSource = WSource(constant=1.0)
    t0: float = Field(1e-3, gt=0)
    us: list[float] = [0.5, 0.8]
    tolerance: float = Field(0.05, gt=0)
    appr_tlist: list[float] = []
    appr_reps: int = Field(400, ge=2)
    z_max: float = Field(4.0, gt=0)


TaskConfig = Annotated[
    Union[CheckModel, FindAlpha, Simulate, SampleW, VerifyFixedPoint, VerifyIdentities,
          RecursionTest, Diagnostics],
    Field(discriminator="task"),
]

TASKS = ("check-model", "find-alpha", "simulate", "sample-w", "verify-fixed-point",
         "verify-identities", "recursion-test", "diagnostics")


class Document(Strict):
    config: TaskConfig


def parse(doc: dict, task: str | None = None):
    """Validate ``doc``; ``task`` (from the command line) fills or must match ``doc['task']``."""
    doc = dict(doc)
    if task is not None:
        if doc.setdefault("task", task) != task:
            raise ValueError(f"config task {doc['task']!r} does not match command {task!r}")
    return Document(config=doc).config


def build_model(doc) -> WeightModel:
    if isinstance(doc, str):
        try:
            return fleet.NAMED[doc]()
        except KeyError:
            raise ValueError(f"unknown model name {doc!r}; known: {sorted(fleet.NAMED)}") from None
    return WeightModel.from_dict(doc)
