"""Event-driven shop floor: EDD queues, lognormal setups, whole-lot completion.

Time is in minutes from the start of period 0.  Each machine works one lot
at a time: it takes the earliest-due order from its queue, draws a setup
time, processes the lot deterministically and books the whole quantity into
stock when it finishes.  Releases consume component stock; a release whose
components are short waits and is retried after every completion.
"""

from __future__ import annotations

import csv
import heapq
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .production import PERIOD_MINUTES, ProductionSystem

SETUP_STREAM = 7


@dataclass
class ShopOrder:
    id: int
    item: int
    quantity: float
    due_period: int
    release_time: float
    setup_time: float | None = None
    start_time: float | None = None
    completion_time: float | None = None

    @property
    def completed(self) -> bool:
        return self.completion_time is not None


def lognormal_params(mean: float, cv: float) -> tuple[float, float]:
    """(mu, sigma) of the lognormal with the given mean and coefficient of variation."""
    sigma2 = np.log1p(cv * cv)
    return float(np.log(mean) - sigma2 / 2), float(np.sqrt(sigma2))


@dataclass
class SetupSampler:
    mean: float
    cv: float
    rng: np.random.Generator

    def __post_init__(self) -> None:
        if self.mean < 0 or self.cv < 0:
            raise ValueError("setup mean and cv must be nonnegative")


def sample_setup(sampler: SetupSampler) -> float:
    if sampler.cv == 0 or sampler.mean == 0:
        return float(sampler.mean)
    mu, sigma = lognormal_params(sampler.mean, sampler.cv)
    return float(sampler.rng.lognormal(mu, sigma))


def machine_stream(seed: int, resource_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, SETUP_STREAM, zlib.crc32(resource_id.encode())])


@dataclass
class MachineState:
    resource_id: str
    rng: np.random.Generator
    queue: list = field(default_factory=list)          # heap of (due, id, order)
    current: ShopOrder | None = None
    finish_at: float = 0.0
    clock: float = 0.0
    busy_minutes: float = 0.0
    setups: list[float] = field(default_factory=list)

    @property
    def busy_until(self) -> float:
        return self.finish_at if self.current else self.clock

    def queued(self) -> list[ShopOrder]:
        return [entry[2] for entry in sorted(self.queue)]


class ShopFloor:
    """All machines of a production system plus the item stock they feed."""

    def __init__(self, system: ProductionSystem, seed: int = 0, setup_cv: float = 0.2,
                 initial_stock: dict[int, float] | None = None, trace: bool = False):
        if setup_cv < 0:
            raise ValueError("setup cv must be nonnegative")
        self.system = system
        self.setup_cv = setup_cv
        self.clock = 0.0
        self.machines = {r.id: MachineState(r.id, machine_stream(seed, r.id)) for r in system.resources}
        self._machine_of = {g: r.id for r in system.resources for g in r.items}
        self.stock = {g: 0.0 for g in system.produced_items}
        for g, q in (initial_stock or {}).items():
            if system.items[g].is_raw:
                continue
            if q < 0:
                raise ValueError("initial stock must be nonnegative")
            self.stock[g] = float(q)
        self._needs = {g: [(e.child, e.quantity_per) for e in system.children(g)
                           if not system.items[e.child].is_raw] for g in system.produced_items}
        self.deferred: list[ShopOrder] = []
        self.completed: list[ShopOrder] = []
        self.issued: dict[int, float] = {g: 0.0 for g in self.stock}
        self.enqueued: dict[int, float] = {g: 0.0 for g in self.stock}
        self.produced: dict[int, float] = {g: 0.0 for g in self.stock}
        self.deferral_count = 0
        self.events: list[tuple[int, str, float]] | None = [] if trace else None

    # -- state queries ---------------------------------------------------------

    def wip(self) -> dict[int, float]:
        """Quantity per item released to a machine and not yet finished."""
        out = {g: 0.0 for g in self.stock}
        for m in self.machines.values():
            if m.current is not None:
                out[m.current.item] += m.current.quantity
            for _, _, o in m.queue:
                out[o.item] += o.quantity
        return out

    def deferred_quantity(self) -> dict[int, float]:
        out = {g: 0.0 for g in self.stock}
        for o in self.deferred:
            out[o.item] += o.quantity
        return out

    def _log(self, order: ShopOrder, kind: str, t: float) -> None:
        if self.events is not None:
            self.events.append((order.id, kind, t))

    # -- releases ----------------------------------------------------------------

    def _components_available(self, order: ShopOrder) -> bool:
        tol = 1e-9
        return all(self.stock[c] + tol * max(1.0, self.stock[c]) >= order.quantity * q
                   for c, q in self._needs[order.item])

    def _issue_and_enqueue(self, order: ShopOrder, t: float) -> None:
        for c, q in self._needs[order.item]:
            need = order.quantity * q
            self.stock[c] = max(0.0, self.stock[c] - need)
            self.issued[c] += need
        self.enqueued[order.item] += order.quantity
        m = self.machines[self._machine_of[order.item]]
        heapq.heappush(m.queue, (order.due_period, order.id, order))
        self._log(order, "enqueue", t)
        self._start_next(m, t)

    def release(self, order: ShopOrder, t: float | None = None) -> bool:
        """Release ``order``; returns False if it has to wait for components."""
        t = self.clock if t is None else t
        self._log(order, "release", t)
        if not self.deferred:
            if self._components_available(order):
                self._issue_and_enqueue(order, t)
                return True
            self.deferred.append(order)
        else:
            # waiting orders with earlier due dates get the components first
            self.deferred.append(order)
            self.deferred.sort(key=lambda o: (o.due_period, o.id))
            self._retry_deferred(t)
        if any(o is order for o in self.deferred):
            self.deferral_count += 1
            self._log(order, "defer", t)
            return False
        return True

    def _retry_deferred(self, t: float) -> None:
        still = []
        for o in self.deferred:
            if self._components_available(o):
                self._issue_and_enqueue(o, t)
            else:
                still.append(o)
        self.deferred = still

    # -- event loop ----------------------------------------------------------------

    def _start_next(self, m: MachineState, t: float) -> None:
        if m.current is not None or not m.queue:
            return
        _, _, o = heapq.heappop(m.queue)
        item = self.system.items[o.item]
        setup = sample_setup(SetupSampler(item.setup_time_mean, self.setup_cv, m.rng))
        m.setups.append(setup)
        o.setup_time = setup
        o.start_time = t
        duration = setup + o.quantity * item.processing_time
        m.finish_at = t + duration
        m.busy_minutes += duration
        m.current = o
        m.clock = t
        self._log(o, "start", t)

    def advance_to(self, t_end: float) -> list[ShopOrder]:
        """Process every completion up to ``t_end``; returns the finished orders."""
        if t_end < self.clock:
            raise ValueError(f"cannot move the clock back from {self.clock} to {t_end}")
        done = []
        while True:
            nxt = None
            for m in self.machines.values():
                if m.current is not None and m.finish_at <= t_end:
                    if nxt is None or m.finish_at < nxt.finish_at:
                        nxt = m
            if nxt is None:
                break
            o = nxt.current
            t = nxt.finish_at
            o.completion_time = t
            nxt.current = None
            nxt.clock = t
            self.stock[o.item] += o.quantity
            self.produced[o.item] += o.quantity
            self.completed.append(o)
            done.append(o)
            self._log(o, "complete", t)
            if self.deferred:
                self._retry_deferred(t)
            self._start_next(nxt, t)
        for m in self.machines.values():
            if m.current is None:
                m.clock = t_end
        self.clock = t_end
        return done

    def advance_period(self, period: int) -> list[ShopOrder]:
        return self.advance_to((period + 1) * PERIOD_MINUTES)

    def export_events(self, path: str | Path) -> None:
        if self.events is None:
            raise ValueError("event tracing was not enabled")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["order", "event", "minute"])
            writer.writerows(self.events)


def release_to_floor(floor: ShopFloor, order: ShopOrder, clock: float | None = None) -> bool:
    return floor.release(order, clock)


def advance_to(floor: ShopFloor, t_end: float) -> list[ShopOrder]:
    return floor.advance_to(t_end)
