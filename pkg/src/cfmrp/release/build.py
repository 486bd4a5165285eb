"""Turn MRP planned orders on one resource into a release instance and solve it."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..clearing import ClearingFunction, make_cf
from ..mrp import PlannedOrder, PlanningError, PlanningState
from ..production import ProductionSystem, Resource
from .model import ModelOrder, ReleaseModelInstance, verify_certificate
from .solver import solve


@dataclass(frozen=True)
class ReleaseConfig:
    max_lead: int = 4
    # Release in the due period itself is allowed unless this is False.
    allow_due_period: bool = True
    # Backlog cost the model charges for components (they carry none in the cost table).
    component_backlog_cost: float = 38.0
    time_limit: float = 60.0
    gap: float = 1e-6
    # Branch-and-bound node budget per solve; None searches to the gap.  Unlike
    # the time limit it keeps budgeted runs reproducible.
    node_limit: int | None = None
    verify: bool = False

    def __post_init__(self) -> None:
        if self.max_lead < 1:
            raise ValueError("max_lead must be at least 1")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be at least 1")


def build_instance(orders: Sequence[PlannedOrder], open_orders: Sequence[PlannedOrder],
                   resource: Resource, system: ProductionSystem, cf: ClearingFunction,
                   now: int, n_periods: int, config: ReleaseConfig = ReleaseConfig()
                   ) -> tuple[ReleaseModelInstance, list[PlannedOrder]]:
    """Instance for the unreleased ``orders`` of one resource.

    Released orders of the resource's items enter as initial WIP and as
    deliveries at their due period (or at ``now`` when already late).
    Returns the instance and the planned orders in instance order.
    """
    items = tuple(resource.items)
    for o in orders:
        if o.item not in items:
            raise PlanningError(f"order {o.id} (item {o.item}) is not produced on {resource.id}")
        if o.released:
            raise PlanningError(f"order {o.id} is already released")
    T = n_periods
    end = now + T - 1
    ordered = sorted(orders, key=lambda o: (items.index(o.item), o.due_period, o.id))
    demand = {g: np.zeros(T) for g in items}
    model_orders = []
    for o in ordered:
        latest = o.due_period if config.allow_due_period else o.due_period - 1
        latest = min(max(latest, now), end)
        earliest = min(max(o.due_period - config.max_lead, now), latest)
        if o.due_period > end:
            raise PlanningError(f"order {o.id} due {o.due_period} beyond the horizon end {end}")
        model_orders.append(ModelOrder(o.item, o.quantity, o.due_period, earliest, latest))
        demand[o.item][max(o.due_period - now, 0)] += o.quantity
    wip = {g: 0.0 for g in items}
    for o in open_orders:
        if o.item in wip:
            wip[o.item] += o.quantity
            k = max(o.due_period - now, 0)
            if k < T:
                demand[o.item][k] += o.quantity
    spec = {g: system.items[g] for g in items}
    inst = ReleaseModelInstance(
        items=items, start=now, n_periods=T, orders=tuple(model_orders),
        processing={g: it.processing_time for g, it in spec.items()},
        setup={g: it.setup_time_mean for g, it in spec.items()},
        cost_fgi={g: it.cost_fgi for g, it in spec.items()},
        cost_wip={g: it.cost_wip for g, it in spec.items()},
        cost_backlog={g: it.cost_backlog if it.is_end_item else config.component_backlog_cost
                      for g, it in spec.items()},
        cf=cf, demand=demand, initial_wip=wip, max_lead=config.max_lead)
    return inst, ordered


@dataclass
class CfReleasePlanner:
    """Release optimizer for :func:`cfmrp.mrp.mrp_plan` in cf-optimized mode.

    ``cf`` is a clearing function spec (see :func:`cfmrp.clearing.make_cf`)
    applied to every resource's capacity, or a callable ``resource -> cf``.
    """

    cf: str | Sequence | Callable[[Resource], ClearingFunction] = "ideal"
    config: ReleaseConfig = field(default_factory=ReleaseConfig)
    solves: int = 0
    solve_seconds: float = 0.0
    max_gap: float = 0.0
    within_gap: int = 0
    failed_checks: int = 0
    on_instance: Callable | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def clearing_function(self, resource: Resource) -> ClearingFunction:
        if callable(self.cf):
            return self.cf(resource)
        if resource.id not in self._cache:
            self._cache[resource.id] = make_cf(self.cf, resource.capacity_minutes)
        return self._cache[resource.id]

    def __call__(self, system: ProductionSystem, resource: Resource,
                 orders: list[PlannedOrder], state: PlanningState):
        open_orders = list(state.open_orders)
        inst, ordered = build_instance(orders, open_orders, resource, system,
                                       self.clearing_function(resource), state.now,
                                       state.horizon, self.config)
        t0 = time.perf_counter()
        plan, cert = solve(inst, time_limit=self.config.time_limit, gap=self.config.gap,
                           node_limit=self.config.node_limit)
        self.solve_seconds += time.perf_counter() - t0
        self.solves += 1
        self.max_gap = max(self.max_gap, cert.gap)
        self.within_gap += cert.status != "optimal"
        if self.config.verify:
            check = verify_certificate(inst, plan, cert)
            if not check:
                self.failed_checks += 1
                raise PlanningError(f"certificate check failed at {check.failed}: {check.detail}")
            cert.max_residual = check.max_residual
        if self.on_instance is not None:
            self.on_instance(inst, plan, cert)
        for j, o in enumerate(ordered):
            o.release_period = plan.release_period[j]
        return cert
