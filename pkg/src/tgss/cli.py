"""Command line interface: run suites, solve single problems, self-test.

Configuration can come from a flat key-value file with dotted section
names (e.g. ``solver.tau = 2.8`` or ``bench.problem = invpot1d``); every
flag mirrors a key and command line values override the file.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench
from .solvers import METHODS, SolverConfig

SOLVER_KEYS = {
    "eta": float, "tau": float, "mu": float, "c_F": float,
    "nesterov_alpha": float, "q_scale": float, "q_power": float,
    "j_max": int, "i0": int, "n_directions": int, "max_iters": int,
    "rho": float, "delta_mode": str, "lambda_rule": str,
}

BENCH_KEYS = {
    "problem": str, "mesh_n": int, "problem_seed": int,
    "noise_scale": str, "out": str, "trace_dir": str,
}


def parse_config_file(path: str) -> dict:
    """Flat ``section.key = value`` lines; '#' starts a comment."""
    out: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def _typed(section: str, key: str, value):
    table = SOLVER_KEYS if section == "solver" else BENCH_KEYS
    if key not in table:
        raise ValueError(f"unknown config key {section}.{key}")
    return table[key](value)


def build_specs(args) -> bench.BenchSpec:
    file_cfg = parse_config_file(args.config) if args.config else {}
    solver_overrides = {}
    bench_overrides = {}
    for dotted, value in file_cfg.items():
        section, _, key = dotted.partition(".")
        if section == "solver":
            solver_overrides[key] = _typed("solver", key, value)
        elif section == "bench":
            bench_overrides[key] = _typed("bench", key, value)
        else:
            raise ValueError(f"unknown config section {section!r}")

    flag_map = {
        "eta": "eta", "tau": "tau", "mu": "mu", "cf": "c_F", "alpha": "nesterov_alpha",
        "q_scale": "q_scale", "q_power": "q_power", "jmax": "j_max", "i0": "i0",
        "directions": "n_directions", "max_iters": "max_iters",
        "delta_mode": "delta_mode", "lambda_rule": "lambda_rule",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            solver_overrides[key] = value

    if solver_overrides.get("max_iters") is None and "max_iters" not in solver_overrides:
        pass
    problem = args.problem or bench_overrides.get("problem", "invpot1d")
    mesh_n = args.mesh_n or bench_overrides.get(
        "mesh_n", 256 if problem == "invpot1d" else 64
    )
    if "max_iters" not in solver_overrides:
        solver_overrides["max_iters"] = 20000 if problem == "invpot2d" else 50000

    methods = args.method if args.method else list(METHODS)
    return bench.BenchSpec(
        problem=problem,
        mesh_n=mesh_n,
        noise_levels=args.delta if args.delta else [1e-3],
        seeds=args.seed if args.seed else [0],
        methods=methods,
        config=solver_overrides,
        problem_seed=args.problem_seed
        if args.problem_seed is not None
        else int(bench_overrides.get("problem_seed", 12345)),
        noise_scale=args.noise_scale
        or bench_overrides.get("noise_scale", "component"),
        out=args.out or bench_overrides.get("out"),
        trace_dir=args.trace or bench_overrides.get("trace_dir"),
    )


def add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key-value config file")
    p.add_argument("--problem", choices=bench.PROBLEMS)
    p.add_argument("--mesh-n", dest="mesh_n", type=int)
    p.add_argument("--delta", type=float, action="append",
                   help="noise level, repeatable")
    p.add_argument("--seed", type=int, action="append", help="noise seed, repeatable")
    p.add_argument("--method", action="append",
                   help=f"one of {', '.join(METHODS)}; repeatable")
    p.add_argument("--tau", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--cf", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--q-scale", dest="q_scale", type=float)
    p.add_argument("--q-power", dest="q_power", type=float)
    p.add_argument("--jmax", dest="jmax", type=int)
    p.add_argument("--i0", type=int)
    p.add_argument("--directions", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--delta-mode", dest="delta_mode", choices=["effective", "nominal"])
    p.add_argument("--lambda-rule", dest="lambda_rule",
                   choices=["zero", "nesterov", "coupling", "dbts"])
    p.add_argument("--problem-seed", dest="problem_seed", type=int)
    p.add_argument("--noise-scale", dest="noise_scale",
                   choices=["component", "norm"],
                   help="interpret --delta per component or as the noise norm")
    p.add_argument("--out", help="output base path (extension added per format)")
    p.add_argument("--trace", help="directory for per-run trace CSVs")
    p.add_argument("--format", action="append", choices=["csv", "json"])


def cmd_run(args) -> int:
    spec = build_specs(args)
    records = bench.run_suite(spec)
    formats = tuple(args.format) if args.format else ("csv",)
    if spec.out:
        for path in bench.emit(records, spec.out, formats, spec.trace_dir):
            print(f"wrote {path}")
    else:
        print(bench.records_to_csv(records), end="")
    return 0 if all(not r.stopped_by.startswith("error") for r in records) else 1


def cmd_solve(args) -> int:
    spec = build_specs(args)
    if len(spec.methods) != 1 or len(spec.noise_levels) != 1 or len(spec.seeds) != 1:
        print("solve expects exactly one --method, --delta and --seed", file=sys.stderr)
        return 2
    records = bench.run_suite(spec)
    rec = records[0]
    print(f"method      : {rec.method}")
    print(f"k_star      : {rec.k_star}")
    print(f"stopped_by  : {rec.stopped_by}")
    print(f"re_final    : {rec.re_final:.6e}")
    print(f"wall_time_s : {rec.wall_time_s:.3f}")
    if spec.out:
        bench.emit(records, spec.out, ("csv",), spec.trace_dir)
    return 0 if not rec.stopped_by.startswith("error") else 1


def cmd_selftest(args) -> int:
    """Quick invariant suite over the geometry and solver layers."""
    from . import geometry, operator, solvers
    from .numkernel import dot, norm

    rng = np.random.Generator(np.random.PCG64(7))
    failures = []

    def check(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    ok = True
    for _ in range(200):
        n = int(rng.integers(2, 8))
        s = geometry.Stripe(rng.standard_normal(n), rng.standard_normal(),
                            abs(rng.standard_normal()))
        x = 3.0 * rng.standard_normal(n)
        p = geometry.project_stripe(x, s)
        p2 = geometry.project_stripe(p, s)
        ok &= norm(p2 - p) <= 1e-9
        ok &= abs(dot(s.u, p) - s.alpha) <= s.xi + 1e-9
    check("stripe projection idempotent and feasible", ok)

    d = rng.uniform(0.2, 1.0, 12)
    op = operator.DiagonalOperator(d)
    truth = rng.standard_normal(12)
    data = operator.add_noise(op.apply(truth), 1e-3, 3)
    cfg = solvers.SolverConfig(eta=0.0, tau=2.0, c_F=op.c_F, max_iters=5000)
    ok = True
    for method in METHODS:
        res = solvers.run(method, op, data, np.zeros(12), cfg, truth=truth)
        ok &= res.stopped_by == "discrepancy"
    check("all methods stop via discrepancy on the linear test operator", ok)

    res_a = solvers.run("tpg-zero", op, data, np.zeros(12), cfg)
    res_b = solvers.run("land", op, data, np.zeros(12), cfg)
    check("tpg with zero momentum equals landweber",
          res_a.k_star == res_b.k_star
          and norm(res_a.x_final - res_b.x_final) <= 1e-12)

    if failures:
        print(f"{len(failures)} self-test(s) failed")
        return 1
    print("all self-tests passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tgss",
        description="Iterative regularization methods for nonlinear ill-posed problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("solve", cmd_solve), ("selftest", cmd_selftest)):
        p = sub.add_parser(name)
        add_common_flags(p)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
