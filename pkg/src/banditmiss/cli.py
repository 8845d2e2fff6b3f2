"""Command-line front end.

Subcommands:
  run            execute a plan file and write one CSV row per cell
  gittins-table  build or refresh the cached Gittins table
  reproduce      run a named figure's plan; emit CSV + manifest + rendered PNG

Exit status: 0 on full success, 1 when cells failed or output could not be
written, 2 on usage or plan-parse errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import figures as figmod
from . import gittins as gimod
from .experiments import PlanError, iter_plan, load_plan
from .report import RowWriter, outcome_row, read_rows

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2


def _progress_printer(quiet: bool):
    if quiet:
        return None
    return lambda msg: print(msg, file=sys.stderr, flush=True)


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def cmd_run(args) -> int:
    try:
        plan = load_plan(args.plan)
    except FileNotFoundError:
        print(f"error: plan file not found: {args.plan}", file=sys.stderr)
        return EXIT_USAGE
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        plan.master_seed = args.seed
    if args.scale != 1.0:
        plan = plan.scaled(args.scale)
    try:
        handle = open(args.output, "w", encoding="utf-8", newline="")
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    failures = []
    with handle:
        writer = RowWriter(handle)
        for outcome in iter_plan(plan, threads=args.threads,
                                 progress=_progress_printer(args.quiet)):
            writer.write(outcome, plan.master_seed)
            if outcome.error is not None:
                failures.append(outcome)
    if failures:
        print(f"{len(failures)} cell(s) failed:", file=sys.stderr)
        for outcome in failures:
            print(f"  {outcome.cell.describe()}: {outcome.error}", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


def cmd_gittins_table(args) -> int:
    directory = Path(args.out).parent if args.out else None
    try:
        if args.out:
            path = Path(args.out)
            if path.exists() and not args.force:
                table = gimod.load_table(path, args.discount, args.max_state,
                                         args.tol, args.horizon)
            else:
                values = gimod._compute_table(args.discount, args.max_state,
                                              args.tol, args.horizon)
                table = gimod.GittinsTable(args.discount, args.max_state, args.tol,
                                           args.horizon, values)
                gimod.save_table(table, path)
        else:
            table = gimod.build_table(args.discount, args.max_state, args.tol,
                                      args.horizon, directory=directory,
                                      force=args.force)
            path = gimod.cache_path(args.discount, args.max_state, args.tol,
                                    args.horizon)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"table: {path}")
    print(f"G(1,1) = {table.lookup(1, 1):.5f}  (0.8699 expected at discount 0.99)")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    fig_id = args.figure.lower()
    if fig_id not in figmod.FIGURES:
        print(f"error: unknown figure {args.figure!r}; valid ids: "
              + " ".join(sorted(figmod.FIGURES, key=_figure_sort_key)), file=sys.stderr)
        return EXIT_USAGE
    spec = figmod.FIGURES[fig_id]
    plan = spec.plan(args.seed, args.scale)
    outdir = Path(args.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / f"{fig_id}.csv"
        handle = open(csv_path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        print(f"error: cannot write to {outdir}: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    failures = 0
    with handle:
        writer = RowWriter(handle)
        for outcome in iter_plan(plan, threads=args.threads,
                                 progress=_progress_printer(args.quiet)):
            writer.write(outcome, plan.master_seed)
            failures += outcome.error is not None
    png_name = None if args.no_render else f"{fig_id}.png"
    figmod.write_manifest(outdir / f"{fig_id}_manifest.json",
                          figmod.manifest(spec, plan, csv_path.name, png_name,
                                          plan.master_seed, args.scale))
    if not args.no_render:
        figmod.render_figure(spec, read_rows(csv_path), outdir / png_name)
    if failures:
        print(f"{failures} cell(s) failed; see CSV NA rows", file=sys.stderr)
        return EXIT_FAILURES
    print(f"wrote {csv_path}", file=sys.stderr)
    return EXIT_OK


def _figure_sort_key(fig_id: str):
    prefix = 0 if fig_id.startswith("fig") else 1
    return (prefix, int(fig_id.lstrip("figs")))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditmiss",
        description="Two-armed bandit allocation under missing-at-random outcomes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a plan file, write per-cell CSV")
    p_run.add_argument("plan", help="YAML plan file")
    p_run.add_argument("-o", "--output", required=True, help="output CSV path")
    p_run.add_argument("--seed", type=int, default=None, help="override the plan's master seed")
    p_run.add_argument("--scale", type=_positive_float, default=1.0,
                       help="multiply replication counts (e.g. 0.1 for a quick pass)")
    p_run.add_argument("--threads", type=int, default=1, help="worker processes")
    p_run.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p_run.set_defaults(func=cmd_run)

    p_git = sub.add_parser("gittins-table", help="build or refresh the Gittins table cache")
    p_git.add_argument("--discount", type=float, default=gimod.DEFAULT_DISCOUNT)
    p_git.add_argument("--max-state", type=int, default=gimod.DEFAULT_MAX_STATE)
    p_git.add_argument("--tol", type=_positive_float, default=gimod.DEFAULT_TOL)
    p_git.add_argument("--horizon", type=int, default=gimod.DEFAULT_HORIZON)
    p_git.add_argument("--out", default=None,
                       help="explicit table file (default: the cache directory)")
    p_git.add_argument("--force", action="store_true", help="recompute even if cached")
    p_git.set_defaults(func=cmd_gittins_table)

    p_rep = sub.add_parser("reproduce", help="reproduce a named figure's data")
    p_rep.add_argument("figure", help="figure id: " + " ".join(sorted(figmod.FIGURES,
                                                                      key=_figure_sort_key)))
    p_rep.add_argument("-o", "--output-dir", default="figures-out")
    p_rep.add_argument("--scale", type=_positive_float, default=1.0,
                       help="multiply replication counts (1.0 = published scale)")
    p_rep.add_argument("--seed", type=int, default=20260810)
    p_rep.add_argument("--threads", type=int, default=1)
    p_rep.add_argument("--no-render", action="store_true",
                       help="emit CSV and manifest only, skip the PNG")
    p_rep.add_argument("--quiet", action="store_true")
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
