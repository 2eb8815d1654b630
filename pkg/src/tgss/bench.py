"""Benchmark harness: configure a problem, run method suites, emit results.

Every (noise level, seed) pair generates one noisy data set that all
methods consume identically, so iteration counts and errors are directly
comparable.  Output is a CSV/JSON table with per-run rows plus optional
per-iteration trace files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import invpot
from .numkernel import Vec, norm
from .operator import DiagonalOperator, ForwardOperator, add_noise
from .solvers import METHODS, SolveResult, SolverConfig, run

CSV_HEADER = "method,delta,seed,k_star,wall_time_s,re_final,rate_k,rate_t,stopped_by"

PROBLEMS = ("invpot1d", "invpot2d", "linear-diag")


class MetricError(ValueError):
    pass


@dataclass
class BenchSpec:
    problem: str = "invpot1d"
    mesh_n: int = 256
    noise_levels: list[float] = field(default_factory=lambda: [1e-3])
    seeds: list[int] = field(default_factory=lambda: [0])
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    config: dict = field(default_factory=dict)
    method_config: dict = field(default_factory=dict)
    problem_seed: int = 12345
    noise_scale: str = "component"
    out: str | None = None
    trace_dir: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise MetricError(f"unknown problem {self.problem!r}")
        if self.noise_scale not in ("component", "norm"):
            raise MetricError(f"unknown noise_scale {self.noise_scale!r}")
        if not self.methods or not self.noise_levels or not self.seeds:
            raise MetricError("need at least one method, noise level and seed")


@dataclass
class BenchRecord:
    method: str
    delta: float
    seed: int
    k_star: int
    wall_time_s: float
    re_final: float
    rate_k: float | None
    rate_t: float | None
    stopped_by: str
    result: SolveResult | None = None   # not serialized

    def csv_row(self) -> str:
        return ",".join([
            self.method,
            repr(self.delta),
            str(self.seed),
            str(self.k_star),
            repr(self.wall_time_s),
            repr(self.re_final),
            "" if self.rate_k is None else repr(self.rate_k),
            "" if self.rate_t is None else repr(self.rate_t),
            self.stopped_by,
        ])

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "delta": self.delta,
            "seed": self.seed,
            "k_star": self.k_star,
            "wall_time_s": self.wall_time_s,
            "re_final": self.re_final,
            "rate_k": self.rate_k,
            "rate_t": self.rate_t,
            "stopped_by": self.stopped_by,
        }


def relative_error(x: Vec, truth: Vec) -> float:
    """||x - truth|| / ||truth||."""
    tn = norm(truth)
    if tn == 0.0:
        raise MetricError("relative error undefined for zero truth")
    return norm(np.asarray(x, dtype=float) - np.asarray(truth, dtype=float)) / tn


def make_problem(spec: BenchSpec) -> tuple[ForwardOperator, Vec, Vec, Vec]:
    """Operator, ground-truth coefficient, exact data and initial guess."""
    base = solver_config(spec)
    if spec.problem == "invpot1d":
        mesh = invpot.make_mesh(1, spec.mesh_n)
        op = invpot.InversePotentialOperator(mesh, f=1.0, eta=base.eta, c_F=base.c_F)
        truth = invpot.true_coefficient(mesh)
        x0 = np.ones(mesh.n_nodes)
    elif spec.problem == "invpot2d":
        mesh = invpot.make_mesh(2, spec.mesh_n)
        op = invpot.InversePotentialOperator(mesh, f=1.0, eta=base.eta, c_F=base.c_F)
        truth = invpot.true_coefficient(mesh)
        x0 = np.ones(mesh.n_nodes)
    else:
        rng = np.random.Generator(np.random.PCG64(spec.problem_seed))
        d = rng.uniform(0.1, 1.0, spec.mesh_n)
        op = DiagonalOperator(d)
        truth = rng.standard_normal(spec.mesh_n)
        x0 = np.zeros(spec.mesh_n)
    return op, truth, op.apply(truth), x0


def solver_config(spec: BenchSpec, method: str | None = None) -> SolverConfig:
    overrides = dict(spec.config)
    if method is not None:
        overrides.update(spec.method_config.get(method, {}))
    return SolverConfig(**overrides)


def run_suite(spec: BenchSpec) -> list[BenchRecord]:
    """Run every configured method on identical data per (delta, seed) group."""
    op, truth, y_exact, x0 = make_problem(spec)
    records: list[BenchRecord] = []
    for delta in spec.noise_levels:
        if spec.noise_scale == "norm":
            # Calibrate the per-component amplitude so the noise vector's
            # expected norm equals delta, making the recorded effective
            # bound line up with the nominal noise level.
            delta_in = delta / np.sqrt(y_exact.size)
        else:
            delta_in = delta
        for seed in spec.seeds:
            data = add_noise(y_exact, delta_in, seed)
            group: list[BenchRecord] = []
            for method in spec.methods:
                try:
                    cfg = solver_config(spec, method)
                    res = run(method, op, data, x0, cfg, truth=truth)
                    rec = BenchRecord(
                        method=method, delta=delta, seed=seed,
                        k_star=res.k_star, wall_time_s=res.wall_time,
                        re_final=relative_error(res.x_final, truth),
                        rate_k=None, rate_t=None,
                        stopped_by=res.stopped_by, result=res,
                    )
                except Exception as exc:  # per-run failure, suite continues
                    rec = BenchRecord(
                        method=method, delta=delta, seed=seed,
                        k_star=-1, wall_time_s=float("nan"),
                        re_final=float("nan"), rate_k=None, rate_t=None,
                        stopped_by=f"error:{type(exc).__name__}",
                    )
                group.append(rec)
            land = next((r for r in group if r.method == "land" and r.k_star >= 0), None)
            if land is not None and land.k_star > 0:
                for rec in group:
                    if rec.k_star >= 0:
                        rec.rate_k = rec.k_star / land.k_star
                        rec.rate_t = (
                            rec.wall_time_s / land.wall_time_s
                            if land.wall_time_s > 0 else None
                        )
            records.extend(group)
    return records


def records_to_csv(records: list[BenchRecord]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_row() for r in records]) + "\n"


def records_to_json(records: list[BenchRecord]) -> str:
    return json.dumps([r.to_json_dict() for r in records], indent=2)


def records_from_json(text: str) -> list[BenchRecord]:
    return [BenchRecord(**d) for d in json.loads(text)]


def emit(records: list[BenchRecord], out_base: str, formats=("csv",),
         trace_dir: str | None = None) -> list[str]:
    """Write record tables (and per-run traces) to files; returns the paths."""
    import os

    paths = []
    ordered = sorted(records, key=lambda r: (r.delta, r.seed, r.method))
    for fmt in formats:
        path = f"{out_base}.{fmt}"
        try:
            with open(path, "w") as fh:
                if fmt == "csv":
                    fh.write(records_to_csv(ordered))
                elif fmt == "json":
                    fh.write(records_to_json(ordered))
                else:
                    raise MetricError(f"unknown format {fmt!r}")
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        paths.append(path)
    if trace_dir is not None:
        os.makedirs(trace_dir, exist_ok=True)
        for rec in ordered:
            if rec.result is None:
                continue
            name = f"trace_{rec.method}_d{rec.delta:g}_s{rec.seed}.csv"
            path = os.path.join(trace_dir, name)
            with open(path, "w") as fh:
                fh.write("\n".join(rec.result.trace_csv_rows()) + "\n")
            paths.append(path)
    return paths
