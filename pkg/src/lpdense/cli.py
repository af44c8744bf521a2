"""Command-line front end: ``lpdense {solve,compare,profile,gen}``."""
from __future__ import annotations

import argparse
import csv
import gzip
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bench import ERROR, RunRecord, performance_profile, profile_to_csv, read_records, run_one, write_records
from .errors import LpDenseError
from .generate import random_lp, to_raw
from .ipm import SolveOptions
from .model import DensityPolicy, StandardLp, standardize
from .mps import emit_mps, read_mps
from .strategies import VARIANTS

EXIT_OPTIMAL, EXIT_ERROR, EXIT_NONOPTIMAL = 0, 1, 2
TRACE_FIELDS = ["iteration", "mu", "primal_infeasibility", "dual_infeasibility", "cg_predictor",
                "cg_corrector", "max_w_entry", "alpha_p", "alpha_d"]


def _problem_name(path) -> str:
    name = Path(path).name
    for ext in (".gz", ".mps", ".MPS"):
        if name.endswith(ext):
            name = name[: -len(ext)]
    return name


def _load(path) -> StandardLp:
    return standardize(read_mps(path))


def _policy(args) -> DensityPolicy:
    return DensityPolicy(frac=args.dense_frac, min_abs=args.dense_min, min_rows=args.dense_min_rows,
                         force=args.dense_force)


def _options(args, callback=None) -> SolveOptions:
    return SolveOptions(tol_feas=args.tol, tol_opt=args.tol, max_iter=args.max_iter,
                        time_limit=args.time_limit, callback=callback)


def _add_solver_flags(p):
    d = DensityPolicy()
    p.add_argument("--dense-frac", type=float, default=d.frac,
                   help="column is dense above this fraction of m (default %(default)s)")
    p.add_argument("--dense-min", type=int, default=d.min_abs,
                   help="and above this many nonzeros (default %(default)s)")
    p.add_argument("--dense-min-rows", type=int, default=d.min_rows,
                   help="no dense columns below this many rows unless forced (default %(default)s)")
    p.add_argument("--dense-force", action="store_true", help="ignore --dense-min-rows")
    p.add_argument("--tol", type=float, default=1e-8, help="feasibility and optimality tolerance")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--cg-tol", type=float, default=1e-8, help="relative CG tolerance")
    p.add_argument("--time-limit", type=float, default=600.0, help="seconds per solve (default %(default)s)")
    p.add_argument("--no-scale", action="store_true", help="skip geometric scaling")
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry with gen; solves are deterministic")


def _write_csv(records, dest):
    if dest == "-":
        write_records(records, sys.stdout)
        return
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        write_records(records, fh)


def cmd_solve(args) -> int:
    trace_rows = []
    try:
        lp = _load(args.path)
        rec, _ = run_one(_problem_name(args.path), lp, args.strategy, _policy(args),
                         _options(args, trace_rows.append), cg_tol=args.cg_tol, scale=not args.no_scale)
    except (OSError, LpDenseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(rec.text())
    if args.csv:
        _write_csv([rec], args.csv)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_FIELDS)
            for r in trace_rows:
                w.writerow([format(getattr(r, k), ".17g") if isinstance(getattr(r, k), float)
                            else getattr(r, k) for k in TRACE_FIELDS])
    return EXIT_OPTIMAL if rec.optimal else EXIT_NONOPTIMAL


def _compare_cell(task):
    path, variant, policy, opts, cg_tol, scale = task
    name = _problem_name(path)
    try:
        lp = _load(path)
        rec, _ = run_one(name, lp, variant, policy, opts, cg_tol=cg_tol, scale=scale)
    except (OSError, LpDenseError) as exc:
        rec = RunRecord(name, variant, termination=ERROR, message=str(exc))
    return rec


def cmd_compare(args) -> int:
    strategies = args.strategies.split(",")
    bad = [s for s in strategies if s not in VARIANTS]
    if bad or len(strategies) < 2:
        print(f"error: need at least two of {','.join(VARIANTS)}", file=sys.stderr)
        return EXIT_ERROR
    policy, opts = _policy(args), _options(args)
    tasks = [(p, s, policy, opts, args.cg_tol, not args.no_scale) for p in args.paths for s in strategies]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_compare_cell, tasks))
    else:
        records = [_compare_cell(t) for t in tasks]
    records.sort(key=lambda r: (r.problem, r.strategy))
    for r in records:
        print(f"{r.problem:<20} {r.strategy:<9} {r.termination:<10} obj={r.objective:.6g} "
              f"iters={r.ipm_iterations} time={r.wall_time:.6g}s", file=sys.stderr)
    _write_csv(records, args.csv or "-")
    return EXIT_OPTIMAL


def cmd_profile(args) -> int:
    try:
        with open(args.csv_path, encoding="utf-8", newline="") as fh:
            records = read_records(fh)
        prof = performance_profile(records)
    except (OSError, LpDenseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = profile_to_csv(prof)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OPTIMAL


def cmd_gen(args) -> int:
    try:
        lp = random_lp(args.rows, args.cols, args.ndense, args.fill, seed=args.seed,
                       upper_frac=args.upper_frac, planted_optimum=args.planted,
                       deficient_rows=args.deficient_rows)
    except (ValueError, LpDenseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = emit_mps(to_raw(lp)).encode("utf-8")
    out = args.out
    if str(out).endswith(".gz"):
        text = gzip.compress(text, mtime=0)
    Path(out).write_bytes(text)
    print(f"wrote {out}: m={lp.m} n={lp.n} nnz={lp.A.nnz}")
    return EXIT_OPTIMAL


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with I/O errors; 2 means non-optimal
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lpdense", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one MPS file")
    p.add_argument("path")
    p.add_argument("--strategy", choices=VARIANTS, default="proposed")
    p.add_argument("--csv", help="also write the run record to this CSV file ('-' for stdout)")
    p.add_argument("--trace", help="write per-iteration diagnostics to this CSV file")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="solve several files with several strategies")
    p.add_argument("paths", nargs="+")
    p.add_argument("--strategies", default=",".join(VARIANTS), help="comma-separated (default %(default)s)")
    p.add_argument("--csv", help="output CSV (default stdout)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("profile", help="performance-profile points from a compare CSV")
    p.add_argument("csv_path")
    p.add_argument("--csv", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("gen", help="write a random feasible LP with dense columns as MPS")
    p.add_argument("out")
    p.add_argument("--rows", type=int, default=50)
    p.add_argument("--cols", type=int, default=100)
    p.add_argument("--ndense", type=int, default=1)
    p.add_argument("--fill", type=float, default=0.5, help="nonzero fraction of each dense column")
    p.add_argument("--upper-frac", type=float, default=0.0)
    p.add_argument("--deficient-rows", type=int, default=0)
    p.add_argument("--planted", action="store_true", help="plant a known optimal vertex")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
