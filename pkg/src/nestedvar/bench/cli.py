"""Command line entry point: ``nestedvar run | summarize | plot``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import BUNDLED, PlanError, load_plan
from .report import read_csv, read_summary_json, summarize, write_csv, write_json, write_svg
from .runner import execute

log = logging.getLogger("nestedvar")


def _print_summary(summary, out=None):
    out = out or sys.stdout
    print(f"{'scheme':<14}{'epsilon':>12}{'reps':>6}{'rmse':>12}{'mean_time_s':>13}"
          f"{'mean_evals':>14}", file=out)
    for r in summary.rows:
        print(f"{r.scheme:<14}{r.epsilon:>12.6g}{r.replications:>6}{r.rmse:>12.4e}"
              f"{r.mean_time:>13.4e}{r.mean_evals:>14.4e}", file=out)
    print("\nslopes (log-log):", file=out)
    for s in summary.slopes:
        val = f"{s.slope:+.3f} (r2 {s.r2:.3f})" if s.slope is not None else f"n/a: {s.note}"
        print(f"  {s.scheme:<14}{s.metric:<15}{val}", file=out)


def cmd_run(args) -> int:
    plan = load_plan(args.config, seed=args.seed, replications=args.replications)
    out = Path(args.out or plan.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    total = len(plan.cells())
    log.info("%s: %d cells at parallelism %d", plan.name, total, args.parallelism)

    def progress(done, n):
        if args.verbose and (done == n or done % max(1, n // 20) == 0):
            log.info("  %d/%d cells", done, n)

    result = execute(plan, args.parallelism, progress)
    summary = summarize(result.rows)
    write_csv(result.rows, out / "rows.csv")
    write_json(out / "rows.json", rows=result.rows)
    write_json(out / "summary.json", summary=summary)
    write_svg(summary, out / "rmse_time.svg", "rmse", "mean_time")
    write_svg(summary, out / "eps_time.svg", "epsilon", "mean_time")
    write_svg(summary, out / "eps_evals.svg", "epsilon", "mean_evals")
    if result.failures:
        (out / "failures.json").write_text(json.dumps(
            {"schema": 1, "failures": [f.__dict__ for f in result.failures]}, indent=2) + "\n")
    _print_summary(summary)
    print(f"\nwrote {out}/rows.csv, rows.json, summary.json and plots")
    if result.failures:
        print(f"{len(result.failures)} of {total} cells failed, see {out}/failures.json",
              file=sys.stderr)
        return 1
    return 0


def cmd_summarize(args) -> int:
    rows = read_csv(args.rows)
    summary = summarize(rows)
    target = Path(args.out) if args.out else Path(args.rows).with_name("summary.json")
    write_json(target, summary=summary)
    _print_summary(summary)
    print(f"\nwrote {target}")
    return 0


def cmd_plot(args) -> int:
    summary = read_summary_json(args.summary)
    write_svg(summary, args.out, args.x, args.y)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nestedvar",
                                description="Nested and multilevel SA value-at-risk benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help=f"YAML file or bundled name ({', '.join(BUNDLED)})")
    r.add_argument("--parallelism", type=int, default=1, metavar="N")
    r.add_argument("--out", metavar="DIR", help="output directory (default: config output_dir)")
    r.add_argument("--seed", type=int, metavar="S", help="master seed (overrides MLSA_SEED)")
    r.add_argument("--replications", type=int, metavar="R", help="override replications")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="summarize a rows.csv file")
    s.add_argument("rows")
    s.add_argument("--out", metavar="FILE", help="summary JSON path (default: next to rows)")
    s.set_defaults(func=cmd_summarize)

    g = sub.add_parser("plot", help="render a summary JSON as a log-log SVG")
    g.add_argument("summary")
    g.add_argument("--out", required=True, metavar="FILE.svg")
    g.add_argument("--x", default="rmse", choices=("rmse", "epsilon"))
    g.add_argument("--y", default="mean_time", choices=("mean_time", "mean_evals"))
    g.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except (PlanError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
