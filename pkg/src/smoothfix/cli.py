"""Batch runner: ``smoothfix <task> --config path [--strict] [--overwrite] [--workers n]``.

Exit status: 0 when every assertion passes, 1 when one fails (or a warning
was raised under ``--strict``), 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from . import config as cfgmod
from .diagnostics import appr_W_trace, d_alpha_curve, regvar_curve
from .exponent import AlphaInconclusive, AlphaNotBracketed, find_alpha
from .identities import check_ladder_identity, check_many_to_one
from .martingales import CacheError, EmpiricalW, sample_limit_W
from .rng import derive_seed, generator
from .solutions import (PeriodicH, SolutionSpec, ks_critical, ks_two_sample, min_step,
                        residual, sample_min_solution, sum_step)
from .tree import Caps, Prune, first_exit_front, generation_front, ladder_front
from .weights import ModelError, check_assumptions

OUTPUT_ENV = "SMOOTHFIX_OUTPUT_DIR"
DEFAULT_OUTPUT = "smoothfix-out"
REPORT_COLUMNS = ["name", "estimate", "target", "stderr", "z", "pass", "seed", "budget", "depth"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class Row:
    name: str
    estimate: float
    target: float
    stderr: float
    z: float
    passed: bool
    budget: int | None = None
    depth: int | None = None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "pass" if x else "fail"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Runner:
    def __init__(self, cfg, out_dir: Path, workers: int = 1, overwrite: bool = False):
        self.cfg = cfg
        self.out = out_dir
        self.workers = workers
        self.overwrite = overwrite
        self.rows: list[Row] = []
        self.cache: list[dict] = []
        self.model = cfgmod.build_model(cfg.model)
        self._alpha: float | None = cfg.alpha

    def add(self, name, estimate, target, stderr=0.0, z=math.nan, passed=True, budget=None, depth=None):
        self.rows.append(Row(name, float(estimate), float(target), float(stderr), float(z), bool(passed),
                             budget, depth))

    @property
    def alpha(self) -> float:
        if self._alpha is None:
            ce = find_alpha(self.model, budget=self.cfg.budget, seed=derive_seed(self.cfg.seed, "alpha"),
                            workers=self.workers)
            self._alpha = float(ce.alpha)
        return self._alpha

    def h(self, doc: cfgmod.HDoc) -> PeriodicH:
        if doc.constant is not None:
            return PeriodicH.constant(doc.constant)
        if doc.span is None:
            raise ConfigError("h needs 'constant' or 'span'")
        if doc.values is not None:
            return PeriodicH.lattice(doc.span, doc.values, self.alpha)
        amp = doc.sine_amplitude or 0.0
        return PeriodicH.from_function(doc.span, lambda x: 1 + amp * np.sin(2 * np.pi * x), self.alpha,
                                       doc.points)

    def w(self, src: cfgmod.WSource) -> EmpiricalW:
        if src.constant is not None:
            return EmpiricalW.constant(src.constant)
        probe = EmpiricalW(np.zeros(0), {
            "model": self.model.to_json(), "alpha": self.alpha, "depth": src.depth, "eps": src.eps,
            "seed": self.cfg.seed, "reps": src.reps,
        })
        cache_dir = self.out / "cache"
        path = cache_dir / (probe.cache_name() + ".csv")
        t0 = time.perf_counter()
        if path.exists():
            try:
                w = EmpiricalW.load(path)
                self.cache.append({"file": path.name, "event": "hit", "seconds": time.perf_counter() - t0})
                return w
            except CacheError:
                if not self.overwrite:
                    raise
        w = sample_limit_W(self.model, self.alpha, src.depth, src.reps, seed=self.cfg.seed, eps=src.eps,
                           workers=self.workers)
        w.save(cache_dir, overwrite=self.overwrite)
        self.cache.append({"file": path.name, "event": "miss", "seconds": time.perf_counter() - t0})
        return w

    def write(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for r in self.rows:
                w.writerow([r.name, _fmt(r.estimate), _fmt(r.target), _fmt(r.stderr), _fmt(r.z),
                            _fmt(r.passed), _fmt(self.cfg.seed), _fmt(r.budget), _fmt(r.depth)])


# --------------------------------------------------------------------------
# tasks


def task_check_model(r: Runner) -> None:
    c = r.cfg
    rep = check_assumptions(r.model, c.budget, c.seed, c.theta_probe, c.search_max, r.workers)
    for key in ("a1_holds", "a2_holds", "a4a_holds", "a4b_holds", "a5_holds"):
        val = getattr(rep, key)
        r.add(key, float(bool(val)), 1.0, passed=bool(val), budget=c.budget)
    r.add("alpha", rep.a3_alpha if rep.a3_alpha is not None else math.nan, math.nan,
          passed=rep.a3_alpha is not None, budget=c.budget)
    r.add("lattice_span", rep.lattice_span, rep.lattice_span)
    (r.out / "assumptions.json").write_text(json.dumps(
        {"regime": rep.regime, "evidence": rep.evidence, "notes": rep.notes}, default=float,
        sort_keys=True, indent=2) + "\n")


def task_find_alpha(r: Runner) -> None:
    c = r.cfg
    ce = find_alpha(r.model, c.search_max, c.tol, c.budget, derive_seed(c.seed, "alpha"), workers=r.workers)
    target = c.expected if c.expected is not None else math.nan
    ok = c.expected is None or abs(ce.alpha - c.expected) <= c.tolerance
    r.add("alpha", ce.alpha, target, ce.alpha_stderr, passed=ok, budget=None if ce.exact else c.budget)
    r.add("m_prime_at_alpha", ce.m_prime_at_alpha, math.nan, ce.m_prime_stderr,
          passed=ce.m_prime_at_alpha < 0)


def task_simulate(r: Runner) -> None:
    c = r.cfg
    rng = generator(c.seed, 0)
    alpha = r.alpha
    caps = Caps(c.max_generation, c.max_nodes)
    if c.front == "generation":
        front = generation_front(r.model, c.n, rng, Prune(alpha, c.eps), max_nodes=c.max_nodes)
        depth = c.n
    elif c.front == "first_exit":
        front = first_exit_front(r.model, c.t, rng, alpha=alpha, caps=caps)
        depth = None
    else:
        front = ladder_front(r.model, rng, alpha=alpha, caps=caps)
        depth = None
    front.to_csv(r.out / "front.csv", alpha)
    mass = float(np.exp(-alpha * front.S).sum())
    if front.capped:
        warnings.warn("caps hit while building the front", stacklevel=2)
    r.add("front_size", front.size, math.nan, depth=depth)
    r.add("alpha_mass", mass, 1.0, depth=depth)
    r.add("leaked_mass", front.leaked_mass, 0.0, depth=depth)
    r.add("antichain", float(front.is_antichain()), 1.0, passed=front.is_antichain())


def task_sample_w(r: Runner) -> None:
    c = r.cfg
    w = r.w(c.w)
    m, se = w.mean_stderr()
    z = (m - 1.0) / se if se > 0 else (0.0 if abs(m - 1) <= 1e-12 else math.inf)
    r.add("W_mean", m, 1.0, se, z, abs(z) <= c.z_max, budget=c.w.reps, depth=c.w.depth)
    if w.meta.get("cap_warning"):
        warnings.warn("node cap hit in more than 1% of replications", stacklevel=2)


def task_verify_fixed_point(r: Runner) -> None:
    c = r.cfg
    sol = SolutionSpec(r.alpha, r.h(c.h), r.w(c.w))
    tgrid = np.geomspace(c.grid.lo, c.grid.hi, c.grid.points)
    res = residual(sol, r.model, tgrid, c.reps, derive_seed(c.seed, "residual"), r.workers)
    depth = None if c.w.constant is not None else c.w.depth
    for t, d, se, z in zip(res.t, res.diff, res.stderr, res.z):
        r.add(f"residual[t={t:.6g}]", d, 0.0, se, z, abs(z) <= c.z_max, budget=c.reps, depth=depth)
    r.add("residual_sup", res.sup, 0.0, passed=res.sup <= c.sup_max, budget=c.reps, depth=depth)


def task_verify_identities(r: Runner) -> None:
    c = r.cfg
    alpha = r.alpha
    for n in c.ns:
        for g in c.gs:
            cmp = check_many_to_one(r.model, alpha, n, g, c.tree_reps, c.spine_reps,
                                    derive_seed(c.seed, f"m2o:{n}:{g}"), r.workers)
            r.add(f"many_to_one[n={n},g={g}]", cmp.tree_mean, cmp.spine_mean,
                  math.hypot(cmp.tree_stderr, cmp.spine_stderr), cmp.z, abs(cmp.z) <= c.z_max,
                  budget=c.tree_reps, depth=n)
    if c.ladder:
        for g in c.gs:
            cmp = check_ladder_identity(r.model, alpha, g, c.tree_reps, c.spine_reps,
                                        derive_seed(c.seed, f"ladder:{g}"), r.workers)
            r.add(f"ladder[g={g}]", cmp.tree_mean, cmp.spine_mean,
                  math.hypot(cmp.tree_stderr, cmp.spine_stderr), cmp.z, abs(cmp.z) <= c.z_max,
                  budget=c.tree_reps)
            r.add(f"ladder_leak[g={g}]", cmp.leaked, 0.0, passed=cmp.leaked < c.leak_max, budget=c.tree_reps)


def task_recursion_test(r: Runner) -> None:
    c = r.cfg
    sol = SolutionSpec(r.alpha, r.h(c.h), r.w(c.w))
    rng = generator(derive_seed(c.seed, "recursion"), 0)
    xs = sample_min_solution(sol, c.n, rng).x
    ys = min_step(xs, r.model, rng)
    d = ks_two_sample(xs, ys)
    crit = ks_critical(c.n, c.n, c.level)
    r.add("min_step_ks", d, crit, passed=d <= crit, budget=c.n)
    if c.sum_check and c.w.constant is None:
        out = sum_step(sol.w.samples, r.model.powered(r.alpha), rng)
        m = float(out.mean())
        se = float(out.std(ddof=1) / math.sqrt(out.size))
        z = (m - 1.0) / se if se > 0 else 0.0
        r.add("sum_step_mean", m, 1.0, se, z, abs(z) <= c.z_max, budget=out.size, depth=c.w.depth)


def task_diagnostics(r: Runner) -> None:
    c = r.cfg
    h = r.h(c.h)
    sol = SolutionSpec(r.alpha, h, r.w(c.w))
    span = r.model.lattice_span if not h.is_constant else 1.0
    for u in c.us:
        curve = regvar_curve(sol, r.alpha, u, [c.t0], lattice_span=span)
        err = curve.max_error
        r.add(f"regvar[u={u:g}]", curve.ratio[0], curve.target, passed=err <= c.tolerance)
    dc = d_alpha_curve(sol, r.alpha, [c.t0], h=None if h.is_constant else h)
    r.add("d_alpha_score", dc.score, 0.0, passed=dc.score <= c.tolerance)
    if c.appr_tlist:
        tr = appr_W_trace(r.model, sol, c.appr_tlist, c.appr_reps, derive_seed(c.seed, "appr"),
                          workers=r.workers)
        tr.to_csv(r.out / "appr_w.csv")
        for t, g, se in zip(tr.t, tr.mean_abs_gap, tr.stderr):
            r.add(f"appr_gap[t={t:g}]", g, 0.0, se, budget=c.appr_reps)
        if tr.t.size > 1:
            z = tr.shrink_z(0, tr.t.size - 1)
            r.add("appr_gap_shrinks", z, c.z_max, passed=z >= c.z_max, budget=c.appr_reps)


TASK_FUNCS = {
    "check-model": task_check_model,
    "find-alpha": task_find_alpha,
    "simulate": task_simulate,
    "sample-w": task_sample_w,
    "verify-fixed-point": task_verify_fixed_point,
    "verify-identities": task_verify_identities,
    "recursion-test": task_recursion_test,
    "diagnostics": task_diagnostics,
}


# --------------------------------------------------------------------------
# entry point


def output_dir(cfg) -> Path:
    return Path(cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def run(cfg, workers: int = 1, strict: bool = False, overwrite: bool = False) -> int:
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    runner = Runner(cfg, out, workers, overwrite)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        TASK_FUNCS[cfg.task](runner)
    runner.write()
    messages = sorted({str(w.message) for w in caught})
    meta = {
        "config": cfg.model_dump(mode="json"),
        "version": __version__,
        "wall_seconds": time.perf_counter() - t0,
        "workers": workers,
        "warnings": messages,
        "cache": runner.cache,
        "alpha": runner._alpha,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    failed = any(not r.passed for r in runner.rows)
    if failed or (strict and messages):
        return EXIT_FAIL
    return EXIT_PASS


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="smoothfix", description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=cfgmod.TASKS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--strict", action="store_true", help="treat warnings as failures")
    ap.add_argument("--overwrite", action="store_true", help="replace W caches whose checksum differs")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        doc = json.loads(Path(args.config).read_text())
        cfg = cfgmod.parse(doc, args.task)
    except (OSError, json.JSONDecodeError, ValidationError, ValueError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, max(args.workers, 1), args.strict, args.overwrite)
    except CacheError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (AlphaNotBracketed, AlphaInconclusive) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ModelError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
