"""Command-line interface.

Subcommands: ``generate`` (synthetic chunked datasets), ``solve`` (randomized
conditioned-sampling solve), ``exact`` (interior-point solve of the full
problem), ``experiment`` (quartile error tables), ``kappa`` (conditioning
diagnostic).  Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import conditioning, data, pipeline, solver
from .core import QuantileProblem, augment
from .exceptions import (ConditioningError, DataError, InputError,
                         SamplingError, SolverError)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrsample")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic chunked dataset")
    g.add_argument("--kind", choices=["skewed", "gaussian"], default="skewed")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--q", type=float, default=2.0,
                   help="block growth ratio for skewed data")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chunk-rows", type=int, default=None)
    g.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("solve", help="randomized conditioned-sampling solve")
    s.add_argument("input", help="dataset directory or manifest file")
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--method", default="SPC3",
                   choices=["SC", "SPC1", "SPC2", "SPC3", "NOCO", "UNIF"])
    s.add_argument("--s", type=int, default=None, help="target sample size")
    s.add_argument("--eps", type=float, default=None,
                   help="relative-error target; picks s from the bound")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--norm-mode", choices=["exact", "estimated"],
                   default="exact")
    s.add_argument("--in-memory", action="store_true",
                   help="load all chunks and run the in-memory path")
    s.add_argument("--out", default=None, help="write the solution vector as CSV")

    e = sub.add_parser("exact", help="interior-point solve of the full problem")
    e.add_argument("input")
    e.add_argument("--tau", type=float, required=True)
    e.add_argument("--tol", type=float, default=1e-9)
    e.add_argument("--out", default=None)

    x = sub.add_parser("experiment", help="quartile error tables as CSV")
    x.add_argument("config", help="key=value config file")
    x.add_argument("--out", default=None, help="override the output path")

    k = sub.add_parser("kappa", help="conditioning diagnostic for a method")
    k.add_argument("input")
    k.add_argument("--method", default="SPC3",
                   choices=["SC", "SPC1", "SPC2", "SPC3", "NOCO"])
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--max-rows", type=int, default=20000)
    return p


def _dataset(path: str) -> data.ChunkedDataset:
    import os

    manifest = os.path.join(path, "manifest.txt") if os.path.isdir(path) else path
    return data.ChunkedDataset(manifest)


def _emit_solution(sol: solver.Solution, out: str):
    print(f"status={sol.status} objective={sol.objective:.12g} "
          f"iterations={sol.iterations} gap={sol.duality_gap:.3g}")
    print("x=" + ",".join(f"{v:.12g}" for v in sol.x))
    if out:
        data.save_csv(out, sol.x)


def _cmd_generate(args) -> int:
    if args.kind == "skewed":
        spec = data.SkewedSpec(n=args.n, d=args.d, q=args.q, seed=args.seed)
        A, b, xstar = data.generate_skewed(spec)
    else:
        spec = data.GaussianSpec(n=args.n, d=args.d, seed=args.seed)
        A, b, xstar = data.generate_gaussian(spec)
    ds = data.save_chunked(A, b, args.out, chunk_rows=args.chunk_rows)
    data.save_csv(f"{args.out}/xstar.csv", xstar)
    print(f"wrote {len(ds.chunks)} chunks ({ds.format}) to {args.out}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    ds = _dataset(args.input)
    if args.in_memory or args.method == "SC":
        A, b = ds.load_all()
        sol, report = solver.solve_randomized(
            QuantileProblem(A, b, args.tau), args.method, seed=args.seed,
            s=args.s, eps=args.eps, exact_norms=args.norm_mode == "exact",
        )
    else:
        sol, report, _ = pipeline.solve_chunked(
            ds, args.tau, args.method, seed=args.seed, s=args.s, eps=args.eps,
            mode=args.norm_mode, plan=pipeline.PassPlan(workers=args.workers),
        )
    print(f"method={report.method} sample_size={report.sample_size} "
          f"expected={report.expected_sample_size:.1f}")
    if sol.status == "infeasible_input":
        print("solver reported a rank-deficient subproblem", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit_solution(sol, args.out)
    return EXIT_OK


def _cmd_exact(args) -> int:
    ds = _dataset(args.input)
    A, b = ds.load_all()
    sol = solver.solve_exact(
        QuantileProblem(A, b, args.tau), solver.SolverConfig(tol=args.tol)
    )
    if sol.status == "infeasible_input":
        print("design matrix is rank-deficient", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit_solution(sol, args.out)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = pipeline.ExperimentConfig.from_file(args.config)
    if args.out:
        config.output = args.out
    rows = pipeline.run_experiment(config)
    print(f"wrote {len(rows)} rows to {config.output}")
    return EXIT_OK


def _cmd_kappa(args) -> int:
    ds = _dataset(args.input)
    A, b = ds.load_all()
    aug = augment(QuantileProblem(A, b, 0.5)).Aaug
    rfac = conditioning.condition(args.method, aug, seed=args.seed)
    alpha, beta, kappa = conditioning.estimate_kappa(
        aug, rfac.R, max_rows=args.max_rows, seed=args.seed
    )
    print(f"method={rfac.method} alpha={alpha:.6g} beta={beta:.6g} "
          f"kappa={kappa:.6g}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "exact": _cmd_exact,
    "experiment": _cmd_experiment,
    "kappa": _cmd_kappa,
}


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (InputError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, ConditioningError, SamplingError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
