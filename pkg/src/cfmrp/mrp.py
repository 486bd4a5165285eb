"""Classic MRP per low-level code: netting, FOP lot sizing, scheduling, explosion.

Periods are absolute integers.  A planning run at period ``now`` covers the
periods ``now .. now + horizon - 1``; vectors indexed by ``k`` refer to
period ``now + k``.  Backward scheduling can be swapped for a release
optimizer that is called once per resource and low-level code.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .demand import ForecastSet
from .production import ProductionSystem, Resource

MRP_BACKWARD = "mrp-backward"
CF_OPTIMIZED = "cf-optimized"
MODES = (MRP_BACKWARD, CF_OPTIMIZED)

# Quantities below this are treated as zero (float noise from netting).
QTY_EPS = 1e-9


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlanningParams:
    planned_lead_time: int = 1
    safety_stock_multiplier: float = 0.0
    fop: int = 1
    mode: str = MRP_BACKWARD

    def __post_init__(self) -> None:
        if self.planned_lead_time < 1:
            raise ValueError("planned lead time must be at least 1 period")
        if self.fop < 1:
            raise ValueError("FOP must be at least 1 period")
        if self.safety_stock_multiplier < 0:
            raise ValueError("safety stock multiplier must be nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class PlannedOrder:
    id: int
    item: int
    quantity: float
    due_period: int
    release_period: int | None = None
    released: bool = False

    def __post_init__(self) -> None:
        if not self.quantity > 0:
            raise ValueError(f"order {self.id}: quantity must be positive")


@dataclass
class NetPlan:
    item: int
    gross: np.ndarray
    projected: np.ndarray
    net: np.ndarray
    orders: list[PlannedOrder] = field(default_factory=list)


@dataclass
class PlanningState:
    """What MRP sees at the start of period ``now``.

    ``net_inventory`` is stock on hand minus backlog.  ``open_orders`` are
    orders already released (frozen); they arrive as scheduled receipts at
    their due period, or at ``now`` if already late.  ``pending_issues``
    lists released orders whose components have not been issued yet; their
    component needs stay gross requirements at ``now``.
    """

    now: int
    net_inventory: Mapping[int, float]
    open_orders: Sequence[PlannedOrder] = ()
    pending_issues: Sequence[PlannedOrder] = ()
    safety_stock: Mapping[int, float] = field(default_factory=dict)
    horizon: int = 14


@dataclass
class MrpPlan:
    now: int
    items: dict[int, NetPlan]
    certificates: list = field(default_factory=list)

    def orders(self) -> list[PlannedOrder]:
        return [o for plan in self.items.values() for o in plan.orders]

    def releases_due(self, period: int) -> list[PlannedOrder]:
        """Orders to release in ``period`` (or earlier), earliest due first."""
        out = [o for o in self.orders() if o.release_period is not None and o.release_period <= period]
        return sorted(out, key=lambda o: (o.due_period, o.item, o.id))


# A release optimizer takes (system, resource, orders, state) and sets release periods.
ReleaseOptimizer = Callable[[ProductionSystem, Resource, list[PlannedOrder], PlanningState], object]


def netting(gross: Sequence[float], on_hand: float, scheduled_receipts: Sequence[float],
            open_wip_receipts: Sequence[float], safety_stock: float) -> np.ndarray:
    """Net requirements that keep projected on-hand at or above safety stock."""
    net, _ = _net(np.asarray(gross, float), on_hand, np.asarray(scheduled_receipts, float)
                  + np.asarray(open_wip_receipts, float), safety_stock)
    return net


def _net(gross: np.ndarray, on_hand: float, receipts: np.ndarray, safety_stock: float):
    n = gross.size
    net = np.zeros(n)
    projected = np.zeros(n)
    level = float(on_hand)
    for k in range(n):
        level += receipts[k] - gross[k]
        shortfall = safety_stock - level
        if shortfall > QTY_EPS * max(1.0, safety_stock, abs(level)):
            net[k] = shortfall
            level = safety_stock
        projected[k] = level
    return net, projected


def fop_lotsize(net: Sequence[float], fop: int, start: int = 0, item: int = 0,
                first_id: int = 0) -> list[PlannedOrder]:
    """Combine ``fop`` consecutive periods of net requirements into one order.

    A window opens at the first period with a positive requirement; the order
    is due at the window's first period.  ``start`` is the period of ``net[0]``.
    """
    if fop < 1:
        raise ValueError("FOP must be at least 1")
    net = np.asarray(net, float)
    orders = []
    k = 0
    while k < net.size:
        if net[k] <= QTY_EPS:
            k += 1
            continue
        qty = float(net[k:k + fop].sum())
        orders.append(PlannedOrder(first_id + len(orders), item, qty, start + k))
        k += fop
    return orders


def backward_schedule(orders: Iterable[PlannedOrder], plt: int, now: int) -> list[PlannedOrder]:
    """Release ``plt`` periods before due, but never before ``now``."""
    orders = list(orders)
    for o in orders:
        o.release_period = max(o.due_period - plt, now)
    return orders


def bom_explode(orders: Iterable[PlannedOrder], system: ProductionSystem, start: int,
                horizon: int, into: dict[int, np.ndarray] | None = None) -> dict[int, np.ndarray]:
    """Add every order's component needs at its release period.

    Needs before ``start`` are charged at ``start``; needs beyond the horizon
    are dropped.
    """
    gross = {} if into is None else into
    for o in orders:
        if o.release_period is None:
            raise PlanningError(f"order {o.id} has no release period")
        k = max(o.release_period - start, 0)
        if k >= horizon:
            continue
        for edge in system.children(o.item):
            if system.items[edge.child].is_raw:
                continue
            vec = gross.setdefault(edge.child, np.zeros(horizon))
            vec[k] += o.quantity * edge.quantity_per
    return gross


def mrp_plan(state: PlanningState, forecasts: ForecastSet | None, params: PlanningParams,
             system: ProductionSystem, cf_optimizer: ReleaseOptimizer | None = None) -> MrpPlan:
    """One MRP run over all items in low-level-code order."""
    if params.mode == CF_OPTIMIZED and cf_optimizer is None:
        raise PlanningError("cf-optimized mode needs a release optimizer")
    now, N = state.now, state.horizon
    receipts: dict[int, np.ndarray] = {}
    for o in state.open_orders:
        vec = receipts.setdefault(o.item, np.zeros(N))
        k = max(o.due_period - now, 0)
        if k < N:
            vec[k] += o.quantity
    gross: dict[int, np.ndarray] = {}
    for g in system.end_items:
        if forecasts is not None:
            gross[g] = np.array(forecasts.window(g, now, N))
    # components of released orders still waiting for their issue
    bom_explode([PlannedOrder(o.id, o.item, o.quantity, o.due_period, now, True)
                 for o in state.pending_issues], system, now, N, gross)

    plans: dict[int, NetPlan] = {}
    certificates = []
    next_id = 0
    for level in system.levels():
        level_items = [g for g in system.produced_items if system.llc[g] == level]
        for g in level_items:
            gvec = gross.get(g, np.zeros(N))
            net, projected = _net(gvec, state.net_inventory.get(g, 0.0),
                                  receipts.get(g, np.zeros(N)), state.safety_stock.get(g, 0.0))
            orders = fop_lotsize(net, params.fop, now, g, next_id)
            next_id += len(orders)
            plans[g] = NetPlan(g, gvec, projected, net, orders)
        if params.mode == MRP_BACKWARD:
            for g in level_items:
                backward_schedule(plans[g].orders, params.planned_lead_time, now)
        else:
            for res in system.resources_at(level):
                orders = [o for g in res.items for o in plans[g].orders]
                if orders:
                    certificates.append(cf_optimizer(system, res, orders, state))
            for g in level_items:
                for o in plans[g].orders:
                    if o.release_period is None:
                        raise PlanningError(f"optimizer left order {o.id} without release period")
        bom_explode([o for g in level_items for o in plans[g].orders], system, now, N, gross)
    return MrpPlan(now, plans, certificates)


def dump_plan(plans: Iterable[MrpPlan], path: str | Path, mode: str = "") -> None:
    """One row per planned order and planning run."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "item", "due", "release", "quantity", "mode"])
        for plan in plans:
            for o in sorted(plan.orders(), key=lambda o: (o.item, o.due_period)):
                writer.writerow([plan.now, o.item, o.due_period, o.release_period,
                                 repr(o.quantity), mode])
