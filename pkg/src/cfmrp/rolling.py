"""Rolling-horizon loop: forecast, plan, release, simulate, deliver, account.

Period ``t`` runs in this order:

1. forecasts move one period forward (demand due ``t`` is now final);
2. MRP plans from the current stock, backlog and released orders;
3. orders planned for release in ``t`` go to the floor, earliest due first;
4. the floor runs through the 1440 minutes of ``t``;
5. demand due ``t`` is served from stock, older backlog first;
6. costs are charged on the end-of-period state.
"""

from __future__ import annotations

import csv
import dataclasses
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .demand import (DemandModelParams, ForecastSet, advance_one_period, init_forecasts,
                     realized_demand, restore, snapshot)
from .mrp import CF_OPTIMIZED, PlannedOrder, PlanningParams, PlanningState, mrp_plan, QTY_EPS
from .production import PERIOD_MINUTES, ProductionSystem
from .release.build import CfReleasePlanner, ReleaseConfig
from .shopfloor import ShopFloor, ShopOrder

# Tardiness cost per unit equals h_I * p / (1 - p) for the 95 % service target.
TARGET_SERVICE = 0.95


@dataclass(frozen=True)
class SimConfig:
    system: ProductionSystem
    demand: DemandModelParams
    planning: PlanningParams = PlanningParams()
    cf: str | tuple = "ideal"
    run_length: int = 200
    warmup: int = 40
    seed: int = 0
    setup_cv: float = 0.2
    release: ReleaseConfig = ReleaseConfig()
    # Opening stock in periods of average demand for every produced item.
    initial_cover: float = 2.0
    planning_horizon: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.warmup < self.run_length:
            raise ValueError("need 0 <= warmup < run_length")
        if self.setup_cv < 0 or self.initial_cover < 0:
            raise ValueError("setup_cv and initial_cover must be nonnegative")
        missing = set(self.system.end_items) - set(self.demand.long_term_forecast)
        if missing:
            raise ValueError(f"no demand given for end items {sorted(missing)}")

    @property
    def horizon(self) -> int:
        if self.planning_horizon is not None:
            return self.planning_horizon
        return self.demand.horizon + self.release.max_lead


@dataclass
class PeriodRecord:
    period: int
    fgi: dict[int, float]
    wip: dict[int, float]
    backlog: dict[int, float]
    deferred: dict[int, float]
    demand: dict[int, float]
    delivered_on_time: dict[int, float]
    delivered_late: dict[int, float]
    released: dict[int, float]      # planned releases handed to the floor this period
    enqueued: dict[int, float]      # released quantity that got its components and a queue slot
    completed: dict[int, float]
    issued: dict[int, float]        # component stock consumed by releases
    cost_fgi: float
    cost_wip: float
    cost_tardiness: float
    lead_times: list[int] = field(default_factory=list)
    floored_releases: int = 0

    @property
    def cost_total(self) -> float:
        return self.cost_fgi + self.cost_wip + self.cost_tardiness


@dataclass
class KpiSummary:
    cost_per_period: float
    cost_fgi: float
    cost_wip: float
    cost_tardiness: float
    service_level: float
    aplt_mean: float
    n_periods: int
    n_orders: int
    deferrals: int
    solver_calls: int = 0
    solver_seconds: float = 0.0
    solver_within_gap: int = 0
    max_gap: float = 0.0

    @property
    def cost_inventory(self) -> float:
        return self.cost_fgi + self.cost_wip

    def as_row(self) -> dict[str, float]:
        row = dataclasses.asdict(self)
        row["cost_inventory"] = self.cost_inventory
        return row


@dataclass
class ReplicationResult:
    summary: KpiSummary
    records: list[PeriodRecord]
    state: "SimulationState | None" = field(default=None, repr=False)


class SimulationState:
    """Everything that carries over from one period to the next."""

    def __init__(self, config: SimConfig, trace: bool = False):
        self.config = config
        system = config.system
        self.system = system
        params = dataclasses.replace(config.demand, rng_seed=config.seed)
        self.forecasts: ForecastSet = init_forecasts(params, config.run_length + config.horizon + 1)
        avg = system.average_demand(params.long_term_forecast)
        self.average_demand = avg
        self.safety_stock = {g: config.planning.safety_stock_multiplier * avg[g]
                             for g in system.produced_items}
        self.floor = ShopFloor(system, config.seed, config.setup_cv,
                               {g: config.initial_cover * avg[g] for g in system.produced_items},
                               trace=trace)
        self.planner = (CfReleasePlanner(config.cf, config.release)
                        if config.planning.mode == CF_OPTIMIZED else None)
        self.backlog = {g: deque() for g in system.end_items}     # [due, qty] entries
        self.open_orders: dict[int, PlannedOrder] = {}
        self.shop_orders: dict[int, ShopOrder] = {}
        self.period = 0
        self.next_id = 0
        self.plans = []
        self.keep_plans = False

    def backlog_total(self, g: int) -> float:
        return float(sum(q for _, q in self.backlog.get(g, ())))

    def planning_state(self) -> PlanningState:
        deferred_ids = {o.id for o in self.floor.deferred}
        return PlanningState(
            now=self.period,
            net_inventory={g: self.floor.stock[g] - self.backlog_total(g)
                           for g in self.system.produced_items},
            open_orders=list(self.open_orders.values()),
            pending_issues=[self.open_orders[i] for i in sorted(deferred_ids)],
            safety_stock=self.safety_stock,
            horizon=self.config.horizon)


def _counters(floor: ShopFloor) -> tuple[dict, dict, dict]:
    return dict(floor.enqueued), dict(floor.produced), dict(floor.issued)


def step_period(state: SimulationState) -> PeriodRecord:
    """Run one period and return its record; raises before committing on planning errors."""
    cfg, system, floor = state.config, state.system, state.floor
    t = state.period
    snap = snapshot(state.forecasts)
    advance_one_period(state.forecasts)
    try:
        plan = mrp_plan(state.planning_state(), state.forecasts, cfg.planning, system,
                        state.planner)
    except Exception:
        restore(state.forecasts, snap)
        raise
    if state.keep_plans:
        state.plans.append(plan)

    enq0, prod0, iss0 = _counters(floor)
    released = {g: 0.0 for g in system.produced_items}
    lead_times, floored = [], 0
    t_start = t * PERIOD_MINUTES
    for o in plan.releases_due(t):
        o.id = state.next_id
        state.next_id += 1
        o.released = True
        state.open_orders[o.id] = o
        shop = ShopOrder(o.id, o.item, o.quantity, o.due_period, t_start)
        state.shop_orders[o.id] = shop
        released[o.item] += o.quantity
        lead_times.append(o.due_period - t)
        if cfg.planning.mode != CF_OPTIMIZED and o.due_period - cfg.planning.planned_lead_time < t:
            floored += 1
        floor.release(shop, t_start)

    for shop in floor.advance_period(t):
        state.open_orders.pop(shop.id, None)

    demand, on_time, late = {}, {}, {}
    for g in system.end_items:
        x = realized_demand(state.forecasts, g, t)
        demand[g] = x
        queue = state.backlog[g]
        if x > QTY_EPS:
            queue.append([t, x])
        on_time[g] = late[g] = 0.0
        while queue and floor.stock[g] > QTY_EPS:
            entry = queue[0]
            served = min(entry[1], floor.stock[g])
            floor.stock[g] -= served
            entry[1] -= served
            if entry[0] == t:
                on_time[g] += served
            else:
                late[g] += served
            if entry[1] <= QTY_EPS:
                queue.popleft()
        if floor.stock[g] < QTY_EPS:
            floor.stock[g] = max(floor.stock[g], 0.0)

    enq1, prod1, iss1 = _counters(floor)
    wip = floor.wip()
    fgi = dict(floor.stock)
    backlog = {g: state.backlog_total(g) for g in system.end_items}
    cost_fgi, cost_wip, cost_tardiness = accrue_costs(system, fgi, wip, backlog)
    rec = PeriodRecord(
        period=t, fgi=fgi, wip=wip, backlog=backlog, deferred=floor.deferred_quantity(),
        demand=demand, delivered_on_time=on_time, delivered_late=late, released=released,
        enqueued={g: enq1[g] - enq0[g] for g in enq1},
        completed={g: prod1[g] - prod0[g] for g in prod1},
        issued={g: iss1[g] - iss0[g] for g in iss1},
        cost_fgi=cost_fgi, cost_wip=cost_wip, cost_tardiness=cost_tardiness,
        lead_times=lead_times, floored_releases=floored)
    state.period += 1
    return rec


def accrue_costs(system: ProductionSystem, fgi: dict[int, float], wip: dict[int, float],
                 backlog: dict[int, float]) -> tuple[float, float, float]:
    """(FGI, WIP, tardiness) cost of an end-of-period state."""
    items = system.items
    c_fgi = sum(q * items[g].cost_fgi for g, q in fgi.items())
    c_wip = sum(q * items[g].cost_wip for g, q in wip.items())
    c_tard = sum(q * items[g].cost_backlog for g, q in backlog.items())
    return float(c_fgi), float(c_wip), float(c_tard)


def summarize(records: Sequence[PeriodRecord], warmup: int, deferrals: int = 0,
              planner: CfReleasePlanner | None = None) -> KpiSummary:
    kept = [r for r in records if r.period >= warmup]
    n = len(kept)
    if n == 0:
        raise ValueError("no periods after warmup")
    c_fgi = sum(r.cost_fgi for r in kept) / n
    c_wip = sum(r.cost_wip for r in kept) / n
    c_tard = sum(r.cost_tardiness for r in kept) / n
    demanded = sum(sum(r.demand.values()) for r in kept)
    on_time = sum(sum(r.delivered_on_time.values()) for r in kept)
    service = on_time / demanded if demanded > 0 else 1.0
    leads = [lt for r in kept for lt in r.lead_times]
    return KpiSummary(
        cost_per_period=c_fgi + c_wip + c_tard, cost_fgi=c_fgi, cost_wip=c_wip,
        cost_tardiness=c_tard, service_level=min(1.0, service),
        aplt_mean=float(np.mean(leads)) if leads else float("nan"), n_periods=n,
        n_orders=len(leads), deferrals=deferrals,
        solver_calls=planner.solves if planner else 0,
        solver_seconds=planner.solve_seconds if planner else 0.0,
        solver_within_gap=planner.within_gap if planner else 0,
        max_gap=planner.max_gap if planner else 0.0)


def run_replication(config: SimConfig, trace: bool = False,
                    check: bool = False) -> ReplicationResult:
    """Simulate ``config.run_length`` periods; KPIs exclude the warmup."""
    state = SimulationState(config, trace=trace)
    records = []
    prev = None
    for _ in range(config.run_length):
        rec = step_period(state)
        if check:
            problems = conservation_errors(prev, rec, state.system)
            if problems:
                raise AssertionError(f"period {rec.period}: {problems[0]}")
            prev = rec
        records.append(rec)
    summary = summarize(records, config.warmup, state.floor.deferral_count, state.planner)
    return ReplicationResult(summary, records, state)


def conservation_errors(prev: PeriodRecord | None, rec: PeriodRecord,
                        system: ProductionSystem, initial: dict[int, float] | None = None,
                        tol: float = 1e-6) -> list[str]:
    """Flow-balance violations between two consecutive period records.

    For the first period ``prev`` is None and stocks start from ``initial``
    (defaults to skipping the FGI check).
    """
    out = []
    for g in system.produced_items:
        scale = max(1.0, rec.fgi[g], rec.wip[g], rec.completed[g], rec.released[g])
        if rec.fgi[g] < -tol or rec.wip[g] < -tol:
            out.append(f"item {g}: negative stock")
        w0 = prev.wip[g] if prev else 0.0
        if abs(rec.wip[g] - w0 - rec.enqueued[g] + rec.completed[g]) > tol * scale:
            out.append(f"item {g}: WIP change != enqueued - completed")
        d0 = prev.deferred[g] if prev else 0.0
        if abs(rec.deferred[g] - d0 - rec.released[g] + rec.enqueued[g]) > tol * scale:
            out.append(f"item {g}: waiting releases do not balance")
        if prev is not None or initial is not None:
            f0 = prev.fgi[g] if prev else initial[g]
            delivered = rec.delivered_on_time.get(g, 0.0) + rec.delivered_late.get(g, 0.0)
            if abs(rec.fgi[g] - f0 - rec.completed[g] + rec.issued[g] + delivered) > tol * scale:
                out.append(f"item {g}: FGI change != completed - issued - delivered")
        if g in rec.backlog:
            b0 = prev.backlog[g] if prev else 0.0
            delivered = rec.delivered_on_time[g] + rec.delivered_late[g]
            if abs(rec.backlog[g] - b0 - rec.demand[g] + delivered) > tol * scale:
                out.append(f"item {g}: backlog change != demand - delivered")
    return out


# -- output -------------------------------------------------------------------------

def write_records(records: Sequence[PeriodRecord], path: str | Path) -> None:
    """One row per period and item."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "item", "fgi", "wip", "backlog", "deferred", "demand",
                         "on_time", "late", "released", "completed", "cost_fgi", "cost_wip",
                         "cost_tardiness"])
        for r in records:
            for g in sorted(r.fgi):
                writer.writerow([r.period, g, r.fgi[g], r.wip[g], r.backlog.get(g, 0.0),
                                 r.deferred[g], r.demand.get(g, 0.0),
                                 r.delivered_on_time.get(g, 0.0), r.delivered_late.get(g, 0.0),
                                 r.released[g], r.completed[g], r.cost_fgi, r.cost_wip,
                                 r.cost_tardiness])


def write_summary(summary: KpiSummary, path: str | Path) -> None:
    row = summary.as_row()
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)
