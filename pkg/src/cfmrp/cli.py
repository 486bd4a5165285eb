"""Command line: run a plan, replay one row, report on results, validate a system."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .production import (UTILIZATION_DEMAND, SystemDefinitionError, planned_utilization,
                         resolve_system)


def _cmd_run(args) -> int:
    text = Path(args.plan).read_text()
    plan = ex.parse_plan(args.plan)
    if args.seed is not None:
        plan = dataclasses.replace(plan, base_seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.plan).stem
    manifest = ex.build_manifest(plan, text, str(Path(args.plan).resolve()))
    ex.write_manifest(manifest, out / f"{stem}.manifest.json")
    n = len(manifest["rows"])
    print(f"{stem}: {len(plan.scenarios())} scenarios x {plan.replications} replications = {n} runs")
    rows = ex.write_rows(ex.run_grid(plan, args.workers), out / f"{stem}.csv")
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print(f"  {r['row_id']}: {r['status']}", file=sys.stderr)
    print(f"wrote {out / (stem + '.csv')} ({len(rows) - len(failed)} ok, {len(failed)} failed)")
    return 0 if not failed and len(rows) == n else 1


def _cmd_replay(args) -> int:
    row = ex.replay(args.manifest, args.row_id)
    line = ex.format_row(row)
    if args.csv:
        stored = next((r for r in csv.reader(open(args.csv, newline="")) if r[0] == args.row_id),
                      None)
        if stored is None:
            print(f"row {args.row_id} not found in {args.csv}", file=sys.stderr)
            return 1
        same = stored == line
        print(f"{args.row_id}: {'identical' if same else 'DIFFERS'} to {args.csv}")
        if not same:
            for k, a, b in zip(ex.ROW_FIELDS, stored, line):
                if a != b:
                    print(f"  {k}: stored {a} replayed {b}")
        return 0 if same else 1
    writer = csv.writer(sys.stdout)
    writer.writerow(ex.ROW_FIELDS)
    writer.writerow(line)
    return 0 if row["status"] == "ok" else 1


def _cmd_report(args) -> int:
    rows = ex.read_rows(args.csv)
    out = Path(args.out_dir)
    paths = ex.write_report(rows, out)
    best = ex.read_rows(out / "min_cost.csv")
    print(f"{'util':>5} {'alpha':>5} {'beta':>5} {'mode':<13} {'cost':>9} {'tard':>8} "
          f"{'LT':>5}  parameters")
    for b in best:
        pars = (f"CF {b['cf']} window {b['window']}" if b["mode"] == "cf-optimized"
                else f"PLT {b['plt']}") + f" SS {b['ss']} FOP {b['fop']}"
        print(f"{float(b['utilization']):5.2f} {float(b['alpha']):5.2f} {float(b['beta']):5.2f} "
              f"{b['mode']:<13} {float(b['cost_per_period']):9.1f} "
              f"{float(b['cost_tardiness']):8.1f} {float(b['aplt_mean']):5.2f}  {pars}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_validate(args) -> int:
    try:
        system = resolve_system(args.system)
    except (SystemDefinitionError, OSError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"{system.name}: {len(system.end_items)} end items, {len(system.produced_items)} "
          f"produced items, {len(system.resources)} resources, levels {system.levels()}")
    for res in system.resources:
        print(f"  {res.id}: level {system.llc[res.items[0]]}, items {list(res.items)}")
    print("planned utilization per resource:")
    for u, x in sorted(UTILIZATION_DEMAND.items()):
        util = planned_utilization(system, x)
        spread = ", ".join(f"{k} {v:.3f}" for k, v in util.items())
        print(f"  x_g = {x}: {spread}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=1, help="parallel processes")
    common.add_argument("--out-dir", default="results", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the plan's base seed")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="cfmrp", parents=[common],
                                     description="MRP and clearing-function release planning experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run every scenario of a plan file")
    p.add_argument("plan")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("replay", parents=[common], help="re-run one row of a manifest")
    p.add_argument("manifest")
    p.add_argument("row_id")
    p.add_argument("--csv", help="compare against this results file")
    p.set_defaults(func=_cmd_replay)
    p = sub.add_parser("report", parents=[common], help="min-cost tables and figure data")
    p.add_argument("csv")
    p.set_defaults(func=_cmd_report)
    p = sub.add_parser("validate", parents=[common], help="check a system file or preset")
    p.add_argument("system")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ex.PlanError as exc:
        print(f"plan error: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
