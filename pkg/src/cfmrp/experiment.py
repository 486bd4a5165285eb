"""Experiment plans: parse a grid, run scenario x replication, write CSV and reports.

A plan file holds one ``key = value[, value ...]`` per line; ``#`` starts a
comment.  Grid keys take comma-separated lists, the others a single value::

    system = ps1
    utilization = 0.80, 0.85
    demand = 0/0, 0.5/0, 1.0/0          # alpha/beta pairs
    mode = mrp-backward, cf-optimized
    plt = 1, 2, 3                       # MRP only
    ss = 0, 0.2
    fop = 1, 2, 3
    cf = ideal, high                    # CF mode only
    replications = 10
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import __version__
from .clearing import THREE_SEGMENT_LEVELS
from .demand import DemandModelParams
from .mrp import CF_OPTIMIZED, MODES, MRP_BACKWARD, PlanningParams
from .production import UTILIZATION_DEMAND, ProductionSystem, resolve_system
from .release import ReleaseConfig
from .rolling import KpiSummary, SimConfig, run_replication

log = logging.getLogger(__name__)

CF_KINDS = ("ideal",) + tuple(THREE_SEGMENT_LEVELS)
# Release window upper end: the due period itself, or one period before it.
WINDOWS = ("d", "d-1")


class PlanError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class ExperimentPlan:
    system: str = "ps1"
    demand: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    utilization: tuple[float, ...] = (0.80,)
    mode: tuple[str, ...] = (MRP_BACKWARD,)
    plt: tuple[int, ...] = (1,)
    ss: tuple[float, ...] = (0.0,)
    fop: tuple[int, ...] = (1,)
    cf: tuple[str, ...] = ("ideal",)
    window: tuple[str, ...] = ("d",)
    replications: int = 1
    run_length: int = 200
    warmup: int = 40
    base_seed: int = 0
    setup_cv: float = 0.2
    node_limit: int | None = None
    time_limit: float = 60.0

    def __post_init__(self) -> None:
        for name in ("demand", "utilization", "mode", "plt", "ss", "fop", "cf", "window"):
            if not getattr(self, name):
                raise PlanError(f"grid {name!r} is empty", name)
        for u in self.utilization:
            if u not in UTILIZATION_DEMAND:
                raise PlanError(f"utilization {u} has no demand level; use one of "
                                f"{sorted(UTILIZATION_DEMAND)}", "utilization")
        for m in self.mode:
            if m not in MODES:
                raise PlanError(f"unknown mode {m!r}", "mode")
        for c in self.cf:
            if c not in CF_KINDS:
                raise PlanError(f"unknown clearing function {c!r}", "cf")
        for w in self.window:
            if w not in WINDOWS:
                raise PlanError(f"unknown release window {w!r}", "window")
        if self.replications < 1:
            raise PlanError("replications must be at least 1", "replications")
        if not 0 <= self.warmup < self.run_length:
            raise PlanError("need 0 <= warmup < run_length", "warmup")
        if self.node_limit is not None and self.node_limit < 1:
            raise PlanError("node_limit must be at least 1", "node_limit")

    def scenarios(self) -> list["Scenario"]:
        """The full grid in a fixed order; PLT applies to MRP, CF and window to CF mode."""
        out = []
        for u in self.utilization:
            for a, b in self.demand:
                for mode in self.mode:
                    if mode == MRP_BACKWARD:
                        variants = [(p, "", "") for p in self.plt]
                    else:
                        variants = [(0, c, w) for c in self.cf for w in self.window]
                    for plt, cf, window in variants:
                        for fop in self.fop:
                            for ss in self.ss:
                                out.append(Scenario(self.system, u, a, b, mode, plt, ss, fop,
                                                    cf, window, self.run_length, self.warmup,
                                                    self.setup_cv, self.node_limit,
                                                    self.time_limit))
        return out


@dataclass(frozen=True)
class Scenario:
    system: str
    utilization: float
    alpha: float
    beta: float
    mode: str
    plt: int
    ss: float
    fop: int
    cf: str
    window: str
    run_length: int
    warmup: int
    setup_cv: float
    node_limit: int | None
    time_limit: float

    def sim_config(self, seed: int, system: ProductionSystem | None = None) -> SimConfig:
        system = system or resolve_system(self.system)
        x = UTILIZATION_DEMAND[self.utilization]
        demand = DemandModelParams({g: x for g in system.end_items}, alpha=self.alpha,
                                   beta=self.beta)
        planning = PlanningParams(max(self.plt, 1), self.ss, self.fop, self.mode)
        release = ReleaseConfig(allow_due_period=self.window != "d-1",
                                node_limit=self.node_limit, time_limit=self.time_limit)
        return SimConfig(system, demand, planning, cf=self.cf or "ideal",
                         run_length=self.run_length, warmup=self.warmup, seed=seed,
                         setup_cv=self.setup_cv, release=release)


PARAM_FIELDS = ("system", "utilization", "alpha", "beta", "mode", "plt", "ss", "fop", "cf",
                "window")
# Wall-clock time is left out so a replayed row is bit-identical to the original.
KPI_FIELDS = tuple(f.name for f in dataclasses.fields(KpiSummary)
                   if f.name != "solver_seconds") + ("cost_inventory",)
ROW_FIELDS = ("row_id", "scenario", "replication", "seed") + PARAM_FIELDS + ("status",) + KPI_FIELDS


# -- plan parsing ---------------------------------------------------------------------

def _floats(values, key, n):
    try:
        return tuple(float(v) for v in values)
    except ValueError:
        raise PlanError(f"line {n}: {key} expects numbers") from None


def _ints(values, key, n):
    try:
        return tuple(int(v) for v in values)
    except ValueError:
        raise PlanError(f"line {n}: {key} expects integers") from None


def _pairs(values, n):
    out = []
    for v in values:
        parts = v.split("/")
        if len(parts) > 2:
            raise PlanError(f"line {n}: demand entry {v!r} is not alpha or alpha/beta")
        nums = _floats(parts, "demand", n)
        out.append((nums[0], nums[1] if len(nums) == 2 else 0.0))
    return tuple(out)


def _single(values, key, n):
    if len(values) != 1:
        raise PlanError(f"line {n}: {key} takes a single value")
    return values[0]


def _utilization(values, n):
    out = []
    for u in _floats([v.rstrip("%") for v in values], "utilization", n):
        out.append(round(u / 100.0 if u > 1.5 else u, 4))
    return tuple(out)


_GRID = {
    "demand": lambda v, n: _pairs(v, n),
    "utilization": lambda v, n: _utilization(v, n),
    "mode": lambda v, n: tuple(v),
    "plt": lambda v, n: _ints(v, "plt", n),
    "ss": lambda v, n: _floats(v, "ss", n),
    "fop": lambda v, n: _ints(v, "fop", n),
    "cf": lambda v, n: tuple(v),
    "window": lambda v, n: tuple(v),
}
_SCALAR = {
    "system": lambda v, n: v,
    "replications": lambda v, n: _ints([v], "replications", n)[0],
    "run_length": lambda v, n: _ints([v], "run_length", n)[0],
    "warmup": lambda v, n: _ints([v], "warmup", n)[0],
    "base_seed": lambda v, n: _ints([v], "base_seed", n)[0],
    "setup_cv": lambda v, n: _floats([v], "setup_cv", n)[0],
    "node_limit": lambda v, n: None if v.lower() == "none" else _ints([v], "node_limit", n)[0],
    "time_limit": lambda v, n: _floats([v], "time_limit", n)[0],
}


def parse_plan_text(text: str, base_dir: Path | None = None) -> ExperimentPlan:
    values: dict = {}
    seen: dict[str, int] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PlanError(f"line {n}: expected 'key = value'")
        key, rhs = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key in seen:
            raise PlanError(f"line {n}: {key} already set on line {seen[key]}")
        seen[key] = n
        items = [v.strip() for v in rhs.split(",") if v.strip()]
        if not items:
            raise PlanError(f"line {n}: {key} is empty")
        if key in _GRID:
            values[key] = _GRID[key](items, n)
        elif key in _SCALAR:
            values[key] = _SCALAR[key](_single(items, key, n), n)
        else:
            raise PlanError(f"line {n}: unknown key {key!r}")
    system = values.get("system")
    if system and base_dir is not None and ("/" in system or system.endswith(".ini")):
        path = Path(system)
        values["system"] = str(path if path.is_absolute() else (base_dir / path).resolve())
    try:
        return ExperimentPlan(**values)
    except PlanError as exc:
        line = seen.get(exc.key)
        if line is None and exc.key == "warmup":
            line = seen.get("run_length")
        raise PlanError(f"line {line}: {exc}" if line else str(exc), exc.key) from None


def parse_plan(path: str | Path) -> ExperimentPlan:
    path = Path(path)
    return parse_plan_text(path.read_text(), path.parent)


def plan_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# -- running --------------------------------------------------------------------------

def replication_seed(base_seed: int, replication: int) -> int:
    """Same seed for every scenario of a replication, so comparisons share random numbers."""
    return base_seed ^ replication


def row_id(scenario_index: int, replication: int) -> str:
    return f"s{scenario_index:04d}r{replication:03d}"


@dataclass(frozen=True)
class Task:
    scenario_index: int
    replication: int
    seed: int
    scenario: Scenario


def tasks(plan: ExperimentPlan) -> list[Task]:
    out = []
    for i, sc in enumerate(plan.scenarios()):
        for r in range(plan.replications):
            out.append(Task(i, r, replication_seed(plan.base_seed, r), sc))
    return out


def run_task(task: Task) -> dict:
    """One CSV row; a failing run becomes a row whose status holds the error."""
    sc = task.scenario
    row = {"row_id": row_id(task.scenario_index, task.replication),
           "scenario": task.scenario_index, "replication": task.replication, "seed": task.seed}
    row.update({k: getattr(sc, k) for k in PARAM_FIELDS})
    try:
        summary = run_replication(sc.sim_config(task.seed)).summary
    except Exception as exc:   # failures are data
        log.warning("row %s failed: %s", row["row_id"], exc)
        row["status"] = f"error: {type(exc).__name__}: {exc}"
        row.update({k: "" for k in KPI_FIELDS})
        return row
    row["status"] = "ok"
    kpis = summary.as_row()
    row.update({k: kpis[k] for k in KPI_FIELDS})
    return row


def run_grid(plan: ExperimentPlan, workers: int = 1) -> Iterator[dict]:
    """Rows in grid order (scenario, then replication)."""
    work = tasks(plan)
    if workers <= 1:
        for t in work:
            yield run_task(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(run_task, work)


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_rows(rows: Iterable[dict], path: str | Path) -> list[dict]:
    """Write rows as they arrive; floats are written with full precision."""
    kept = []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROW_FIELDS)
        for row in rows:
            writer.writerow([_cell(row.get(k)) for k in ROW_FIELDS])
            fh.flush()
            kept.append(row)
    return kept


def format_row(row: dict) -> list[str]:
    return [_cell(row.get(k)) for k in ROW_FIELDS]


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- manifest and replay ----------------------------------------------------------------

def _versions() -> dict[str, str]:
    out = {"artifact": __version__, "python": platform.python_version()}
    for dist in ("numpy", "scipy", "highspy"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def build_manifest(plan: ExperimentPlan, plan_text: str, plan_path: str) -> dict:
    return {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "plan_path": plan_path,
        "plan_sha256": plan_digest(plan_text),
        "plan": dataclasses.asdict(plan),
        "versions": _versions(),
        "rows": {row_id(t.scenario_index, t.replication):
                 {"scenario_index": t.scenario_index, "replication": t.replication,
                  "seed": t.seed, "scenario": dataclasses.asdict(t.scenario)}
                 for t in tasks(plan)},
    }


def write_manifest(manifest: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def replay(manifest: dict | str | Path, rid: str) -> dict:
    """Re-run one row from its manifest entry."""
    if not isinstance(manifest, dict):
        manifest = json.loads(Path(manifest).read_text())
    try:
        entry = manifest["rows"][rid]
    except KeyError:
        raise KeyError(f"row {rid!r} is not in the manifest") from None
    return run_task(Task(entry["scenario_index"], entry["replication"], entry["seed"],
                         Scenario(**entry["scenario"])))


# -- reporting --------------------------------------------------------------------------

GROUP_BY = ("system", "alpha", "beta", "utilization", "mode")
REPORT_KPIS = ("cost_per_period", "cost_fgi", "cost_wip", "cost_tardiness", "cost_inventory",
               "service_level", "aplt_mean")


def _num(v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """Mean KPIs per scenario over its successful replications, in first-seen order."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("status", "ok") != "ok":
            continue
        key = tuple(str(row[k]) for k in PARAM_FIELDS)
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        agg = dict(zip(PARAM_FIELDS, key))
        agg["replications"] = len(members)
        for k in REPORT_KPIS:
            vals = np.array([_num(m[k]) for m in members])
            agg[k] = float(vals.mean())
            agg[k + "_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append(agg)
    return out


def select_min_cost(rows: Sequence[dict], group_by: Sequence[str] = GROUP_BY,
                    aggregated: bool = False) -> list[dict]:
    """Per group, the parameterization with the lowest mean overall cost."""
    scen = list(rows) if aggregated else aggregate(rows)
    best: dict[tuple, dict] = {}
    for s in scen:
        key = tuple(str(s[k]) for k in group_by)
        if key not in best or s["cost_per_period"] < best[key]["cost_per_period"]:
            best[key] = s
    for key in {tuple(str(r[k]) for k in group_by) for r in rows} - set(best):
        log.warning("group %s has no successful rows", key)
    return list(best.values())


def _write_table(rows: Sequence[dict], path: Path, fields: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in rows:
            writer.writerow([_cell(r.get(k)) for k in fields])


def write_report(rows: Sequence[dict], out_dir: str | Path) -> list[Path]:
    """Min-cost table plus one tidy CSV per figure analog."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scen = aggregate(rows)
    params = list(PARAM_FIELDS) + ["replications"]
    kpis = [k for k in REPORT_KPIS] + [k + "_sd" for k in REPORT_KPIS]
    written = []

    path = out_dir / "scenario_means.csv"
    _write_table(scen, path, params + kpis)
    written.append(path)

    best = select_min_cost(scen, aggregated=True)
    best.sort(key=lambda s: tuple(str(s[k]) for k in ("system", "utilization", "mode"))
              + (float(s["alpha"]), float(s["beta"])))
    path = out_dir / "min_cost.csv"
    _write_table(best, path, params + kpis)
    written.append(path)

    # cost against demand variability, one line per utilization and planning mode
    path = out_dir / "cost_by_demand.csv"
    _write_table(best, path, ["utilization", "mode", "alpha", "beta", "cost_per_period",
                              "cost_inventory", "cost_tardiness", "aplt_mean", "plt", "ss",
                              "fop", "cf"])
    written.append(path)

    # cost breakdown across lot-sizing periods and safety stock, CF mode
    cf_rows = [s for s in scen if s["mode"] == CF_OPTIMIZED]
    for name, key in (("cost_by_fop.csv", "fop"), ("cost_by_ss.csv", "ss")):
        path = out_dir / name
        _write_table(cf_rows, path, ["utilization", "alpha", "beta", "cf", "window", key,
                                     "cost_per_period", "cost_inventory", "cost_tardiness",
                                     "aplt_mean"])
        written.append(path)

    # lead time and cost across clearing-function shapes
    path = out_dir / "cf_segments.csv"
    _write_table(cf_rows, path, ["utilization", "alpha", "beta", "cf", "window", "fop", "ss",
                                 "aplt_mean", "cost_per_period", "cost_fgi", "cost_wip",
                                 "cost_tardiness", "service_level"])
    written.append(path)
    return written
