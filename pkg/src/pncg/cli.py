"""Command line entry point: ``generate``, ``decompose``, ``bench`` and ``profile``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bench import (
    format_summary, load_config, preset_config, read_runs, run_benchmark, summarize,
    summarize_records, write_profiles,
)
from .metrics import match_and_recover
from .objective import ObjectiveWorkspace
from .runs import TRACE_COLUMNS, StopRule
from .solvers import SOLVER_NAMES, run_solver
from .tensor import read_tensor, write_tensor
from .kruskal import read_model, write_model
from .testgen import TestProblemSpec, make_test_tensor, random_init, stream

log = logging.getLogger("pncg")


def cmd_generate(args) -> int:
    spec = TestProblemSpec(args.size, args.rank, args.collinearity, args.l1, args.l2, args.seed)
    tensor, truth = make_test_tensor(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(tensor, out / "tensor.txt")
    write_model(truth, out / "truth.txt")
    print(f"wrote {out / 'tensor.txt'} and {out / 'truth.txt'}")
    return 0


def cmd_decompose(args) -> int:
    tensor = read_tensor(args.tensor)
    ws = ObjectiveWorkspace(tensor, args.rank)
    if args.init:
        m0 = read_model(args.init)
        if m0.dims != tensor.dims or m0.rank != args.rank:
            raise ValueError("initial model does not match the tensor shape and rank")
    else:
        m0 = random_init(tensor.dims, args.rank, stream(args.seed, "decompose-start"))
    stop = StopRule(args.gtol, args.max_iters, args.max_fevals)
    run = run_solver(args.solver, m0, ws, stop, restart_period=args.restart)
    print(
        f"{args.solver}: {run.status.value} after {run.iterations} iterations, "
        f"{run.fevals} f-evals, {run.time_s:.4f} s, f={run.final_f:.10g}, "
        f"|G|/n={run.final_gnorm:.3e}"
    )
    if args.truth:
        report = match_and_recover(run.model, read_model(args.truth))
        print(f"recovered={report.recovered} min congruence={report.min_congruence:.6f}")
    if args.out:
        write_model(run.model, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for row in run.trace:
                w.writerow([getattr(row, c) for c in TRACE_COLUMNS])
    return 0


def cmd_bench(args) -> int:
    if args.config:
        cfg = load_config(args.config, args.preset)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        raise ValueError("bench needs --config, --preset or both")
    overrides = {}
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.workers:
        overrides["workers"] = args.workers
    if args.solvers:
        overrides["solvers"] = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    if args.save_traces:
        overrides["save_traces"] = True
    cfg = replace(cfg, **overrides)
    out = run_benchmark(cfg, progress=args.verbose)
    print(format_summary(summarize(out)))
    print(f"results in {out}")
    return 0


def cmd_profile(args) -> int:
    records = read_runs(args.runs)
    out = Path(args.out_dir) if args.out_dir else Path(args.runs).parent
    paths = write_profiles(records, out)
    print(format_summary(summarize_records(records)))
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pncg", description="CP decomposition by ALS, NCG and ALS-preconditioned NCG.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write one synthetic test tensor and its true factors")
    g.add_argument("--size", "-I", type=int, default=20)
    g.add_argument("--rank", "-R", type=int, default=3)
    g.add_argument("--collinearity", "-C", type=float, default=0.5)
    g.add_argument("--l1", type=float, default=1.0, help="homoskedastic noise percent")
    g.add_argument("--l2", type=float, default=0.0, help="heteroskedastic noise percent")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("decompose", help="fit a rank-R CP model to a tensor file")
    d.add_argument("tensor", help="tensor text file")
    d.add_argument("--rank", "-R", type=int, required=True)
    d.add_argument("--solver", choices=SOLVER_NAMES, default="pncg-t-pr")
    d.add_argument("--seed", type=int, default=0, help="seed for the random start")
    d.add_argument("--init", help="starting model file instead of a random start")
    d.add_argument("--gtol", type=float, default=StopRule.gtol)
    d.add_argument("--max-iters", type=int, default=StopRule.max_iterations)
    d.add_argument("--max-fevals", type=int, default=StopRule.max_fevals)
    d.add_argument("--restart", type=int, default=0, help="steepest-descent restart period (0 = off)")
    d.add_argument("--truth", help="true model file; prints the recovery report")
    d.add_argument("--out", help="write the fitted model here")
    d.add_argument("--trace", help="write the per-iteration trace CSV here")
    d.set_defaults(func=cmd_decompose)

    b = sub.add_parser("bench", help="run the benchmark protocol")
    b.add_argument("--config", help="file of 'key = value' lines")
    b.add_argument("--preset", help="named base configuration (desk)")
    b.add_argument("--out-dir")
    b.add_argument("--workers", type=int)
    b.add_argument("--solvers", help="comma separated solver names")
    b.add_argument("--save-traces", action="store_true")
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="recompute summary and performance profiles from runs.csv")
    p.add_argument("runs", help="runs.csv written by bench")
    p.add_argument("--out-dir", help="defaults to the directory of runs.csv")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
