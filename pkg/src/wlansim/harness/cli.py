"""Command line entry point: ``wlansim simulate|sweep|check|table``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_scenario
from .run import run_scenario, summary_csv
from .sweep import (
    SweepError, aggregate, parse_sweep, read_rows_csv, rows_csv, run_cells, runs_csv,
)
from .tables import LAYOUTS, TableError, emit_table
from .trends import (
    MIN_REPS, AssertionSyntaxError, InsufficientReplications, trend_check,
)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise SystemExit(f"error: cannot read {path}: {exc.strerror}") from None


def cmd_simulate(args) -> int:
    scenario = load_scenario(_read(args.scenario), dict(args.set or []))
    metrics = run_scenario(scenario, args.seed)
    text = summary_csv(metrics.summary)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def cmd_sweep(args) -> int:
    spec = parse_sweep(_read(args.spec))
    if args.reps is not None:
        spec = spec.with_reps(args.reps)
    template = load_scenario(_read(args.template))
    results = run_cells(spec, template, args.workers)
    rows = aggregate(results, spec.metrics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rows.csv").write_text(rows_csv(rows))
    (out / "runs.csv").write_text(runs_csv(results))
    for name in args.table or []:
        (out / f"{name}.csv").write_text(emit_table(rows, name))
    print(f"{len(spec.cells())} cells x {len(spec.seeds)} seeds -> {out}/rows.csv")
    return 0


def cmd_check(args) -> int:
    rows = read_rows_csv(_read(args.rows))
    report = trend_check(rows, _read(args.assertions), args.min_reps)
    sys.stdout.write(report.text())
    return 0 if report.passed else 1


def cmd_table(args) -> int:
    rows = read_rows_csv(_read(args.rows))
    sys.stdout.write(emit_table(rows, args.layout))
    return 0


def _kv(text: str):
    k, sep, v = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wlansim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario with one seed")
    s.add_argument("--scenario", required=True, help="key=value scenario file")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", default="-", help="metrics CSV path ('-' for stdout)")
    s.add_argument("--set", type=_kv, action="append", metavar="KEY=VALUE",
                   help="override a scenario key (repeatable)")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--spec", required=True, help="sweep file (axes, seeds)")
    s.add_argument("--template", required=True, help="scenario file the axes override")
    s.add_argument("--reps", type=int, help="replications per cell")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, help="worker processes (default: $WLANSIM_WORKERS or CPU count)")
    s.add_argument("--table", action="append", choices=sorted(LAYOUTS),
                   help="also write this table layout (repeatable)")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("check", help="evaluate trend assertions on sweep rows")
    s.add_argument("--rows", required=True)
    s.add_argument("--assertions", required=True)
    s.add_argument("--min-reps", type=int, default=MIN_REPS)
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("table", help="render a table layout from sweep rows")
    s.add_argument("--rows", required=True)
    s.add_argument("--layout", required=True, choices=sorted(LAYOUTS))
    s.set_defaults(fn=cmd_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TableError, AssertionSyntaxError, InsufficientReplications) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
