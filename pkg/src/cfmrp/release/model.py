"""Release-date model for one resource: data, LP layout and plan checking.

Periods inside an instance are absolute; model period ``k`` (0-based) is
absolute period ``start + k``.  Stocks follow the balance equations

    W[t] = W[t-1] + R[t] - P[t-1]
    I[t] - B[t] = I[t-1] - B[t-1] + P[t-1] - X[t]

with ``W[-1]``, ``I[-1]``, ``B[-1]`` the initial state and ``P[-1] = 0``.
Releases happen at the start of a period, so work released in ``t`` can be
produced in ``t`` and serves deliveries from ``t + 1`` on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from ..clearing import ClearingFunction

OVERLOAD_FACTOR = 1000.0
RESIDUAL_TOL = 1e-6


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class ModelOrder:
    item: int
    quantity: float
    due: int
    earliest: int
    latest: int

    @property
    def window(self) -> range:
        return range(self.earliest, self.latest + 1)


@dataclass
class ReleaseModelInstance:
    items: tuple[int, ...]
    start: int
    n_periods: int
    orders: tuple[ModelOrder, ...]
    processing: Mapping[int, float]
    setup: Mapping[int, float]
    cost_fgi: Mapping[int, float]
    cost_wip: Mapping[int, float]
    cost_backlog: Mapping[int, float]
    cf: ClearingFunction
    demand: Mapping[int, np.ndarray]
    initial_wip: Mapping[int, float] = field(default_factory=dict)
    initial_fgi: Mapping[int, float] = field(default_factory=dict)
    initial_backlog: Mapping[int, float] = field(default_factory=dict)
    max_lead: int = 4
    overload_cost: float | None = None

    def __post_init__(self) -> None:
        self.items = tuple(self.items)
        T = self.n_periods
        if T < 1:
            raise InstanceError("instance needs at least one period")
        self.demand = {g: np.asarray(self.demand.get(g, np.zeros(T)), dtype=float)
                       for g in self.items}
        for g in self.items:
            if self.demand[g].shape != (T,):
                raise InstanceError(f"demand of item {g} must have {T} periods")
            if np.any(self.demand[g] < 0):
                raise InstanceError(f"negative demand for item {g}")
            for name in ("processing", "setup", "cost_fgi", "cost_wip", "cost_backlog"):
                if g not in getattr(self, name):
                    raise InstanceError(f"{name} missing for item {g}")
        for mapping in ("initial_wip", "initial_fgi", "initial_backlog"):
            values = {g: float(getattr(self, mapping).get(g, 0.0)) for g in self.items}
            if any(v < 0 for v in values.values()):
                raise InstanceError(f"{mapping} must be nonnegative")
            setattr(self, mapping, values)
        if self.overload_cost is None:
            self.overload_cost = OVERLOAD_FACTOR * sum(self.cost_fgi[g] for g in self.items)
        # Orders sorted per item by due date; the sort is stable.
        self.orders = tuple(sorted(self.orders, key=lambda o: (self.items.index(o.item), o.due)))
        end = self.start + T - 1
        for j, o in enumerate(self.orders):
            if o.item not in self.items:
                raise InstanceError(f"order {j} references item {o.item} outside the instance")
            if o.quantity < 0:
                raise InstanceError(f"order {j} has negative quantity")
            if o.earliest > o.latest or o.earliest < self.start or o.latest > end:
                raise InstanceError(
                    f"order {j} (item {o.item}, due {o.due}) window [{o.earliest}, {o.latest}] "
                    f"does not fit the horizon [{self.start}, {end}]")
            if o.due - o.earliest > self.max_lead:
                raise InstanceError(f"order {j} window starts more than {self.max_lead} periods before due")

    @property
    def capacity(self) -> float:
        return self.cf.capacity

    @property
    def periods(self) -> range:
        return range(self.start, self.start + self.n_periods)

    def successor_pairs(self) -> list[tuple[int, int]]:
        """Consecutive orders of the same item (no-overtaking pairs)."""
        return [(j, j + 1) for j in range(len(self.orders) - 1)
                if self.orders[j].item == self.orders[j + 1].item]

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "cfmrp-release-instance/1",
            "items": list(self.items),
            "start": self.start,
            "n_periods": self.n_periods,
            "max_lead": self.max_lead,
            "overload_cost": self.overload_cost,
            "cf": {"name": self.cf.name, "capacity": self.cf.capacity,
                   "segments": [list(s) for s in self.cf.segments]},
            "orders": [[o.item, o.quantity, o.due, o.earliest, o.latest] for o in self.orders],
            **{name: {str(g): v for g, v in getattr(self, name).items()}
               for name in ("processing", "setup", "cost_fgi", "cost_wip", "cost_backlog",
                            "initial_wip", "initial_fgi", "initial_backlog")},
            "demand": {str(g): self.demand[g].tolist() for g in self.items},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReleaseModelInstance":
        if data.get("format") != "cfmrp-release-instance/1":
            raise InstanceError("not a release instance dump")
        cfd = data["cf"]
        cf = ClearingFunction(tuple(tuple(s) for s in cfd["segments"]), cfd["capacity"], cfd["name"])

        def per_item(name):
            return {int(g): float(v) for g, v in data[name].items()}

        return cls(
            items=tuple(data["items"]), start=data["start"], n_periods=data["n_periods"],
            orders=tuple(ModelOrder(int(g), float(q), int(d), int(e), int(l))
                         for g, q, d, e, l in data["orders"]),
            processing=per_item("processing"), setup=per_item("setup"),
            cost_fgi=per_item("cost_fgi"), cost_wip=per_item("cost_wip"),
            cost_backlog=per_item("cost_backlog"), cf=cf,
            demand={int(g): np.array(v) for g, v in data["demand"].items()},
            initial_wip=per_item("initial_wip"), initial_fgi=per_item("initial_fgi"),
            initial_backlog=per_item("initial_backlog"),
            max_lead=data["max_lead"], overload_cost=data["overload_cost"],
        )


def dump_instance(instance: ReleaseModelInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=1, sort_keys=True))


def load_instance(path: str | Path) -> ReleaseModelInstance:
    return ReleaseModelInstance.from_dict(json.loads(Path(path).read_text()))


# -- LP layout -----------------------------------------------------------------

STOCK_BLOCKS = ("I", "W", "B", "P", "R")
PERIOD_BLOCKS = ("L", "PL", "C")


class Layout:
    """Column indices of the mixed-integer program."""

    def __init__(self, inst: ReleaseModelInstance):
        G, T = len(inst.items), inst.n_periods
        self.G, self.T = G, T
        self.block = {}
        offset = 0
        for name in STOCK_BLOCKS:
            self.block[name] = offset
            offset += G * T
        for name in PERIOD_BLOCKS:
            self.block[name] = offset
            offset += T
        self.n_continuous = offset
        self.ri_order = []
        self.ri_period = []
        self.ri_cols = []
        for j, o in enumerate(inst.orders):
            cols = []
            for t in o.window:
                cols.append(offset)
                self.ri_order.append(j)
                self.ri_period.append(t - inst.start)
                offset += 1
            self.ri_cols.append(np.array(cols, dtype=np.int64))
        self.ri_order = np.array(self.ri_order, dtype=np.int64)
        self.ri_period = np.array(self.ri_period, dtype=np.int64)
        self.n_binary = offset - self.n_continuous
        self.n_cols = offset

    def stock(self, name: str, a: int, k: int) -> int:
        return self.block[name] + a * self.T + k

    def period(self, name: str, k: int) -> int:
        return self.block[name] + k


@dataclass
class LinearModel:
    """Rows ``lo <= A x <= hi``, columns ``0 <= x <= ub``, objective ``c``."""

    layout: Layout
    c: np.ndarray
    A: sparse.csc_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_ub: np.ndarray
    row_names: list[str]


def build_linear_model(inst: ReleaseModelInstance) -> LinearModel:
    lay = Layout(inst)
    G, T = lay.G, lay.T
    inf = np.inf
    rows, cols, vals = [], [], []
    lo, hi, names = [], [], []

    def add_row(entries, lower, upper, name):
        r = len(lo)
        for col, val in entries:
            rows.append(r)
            cols.append(col)
            vals.append(val)
        lo.append(lower)
        hi.append(upper)
        names.append(name)

    ri_by_period_item = [[[] for _ in range(T)] for _ in range(G)]
    for col, j, k in zip(range(lay.n_continuous, lay.n_cols), lay.ri_order, lay.ri_period):
        a = inst.items.index(inst.orders[j].item)
        ri_by_period_item[a][k].append((col, j))

    for a, g in enumerate(inst.items):
        for k in range(T):
            add_row([(lay.stock("R", a, k), 1.0)]
                    + [(col, -inst.orders[j].quantity) for col, j in ri_by_period_item[a][k]],
                    0.0, 0.0, f"eq2[{g},{k}]")
    for j, o in enumerate(inst.orders):
        add_row([(col, 1.0) for col in lay.ri_cols[j]], 1.0, 1.0, f"eq3[{j}]")
    for a, g in enumerate(inst.items):
        W0 = inst.initial_wip[g]
        net0 = inst.initial_fgi[g] - inst.initial_backlog[g]
        X = inst.demand[g]
        for k in range(T):
            entries = [(lay.stock("W", a, k), 1.0), (lay.stock("R", a, k), -1.0)]
            if k > 0:
                entries += [(lay.stock("W", a, k - 1), -1.0), (lay.stock("P", a, k - 1), 1.0)]
            rhs = W0 if k == 0 else 0.0
            add_row(entries, rhs, rhs, f"eq4[{g},{k}]")
        for k in range(T):
            entries = [(lay.stock("I", a, k), 1.0), (lay.stock("B", a, k), -1.0)]
            if k > 0:
                entries += [(lay.stock("I", a, k - 1), -1.0), (lay.stock("B", a, k - 1), 1.0),
                            (lay.stock("P", a, k - 1), -1.0)]
            rhs = -X[k] + (net0 if k == 0 else 0.0)
            add_row(entries, rhs, rhs, f"eq5[{g},{k}]")
    for j, j1 in inst.successor_pairs():
        entries = [(col, float(k)) for col, k in zip(lay.ri_cols[j], lay.ri_period[lay.ri_cols[j] - lay.n_continuous])]
        entries += [(col, -float(k)) for col, k in zip(lay.ri_cols[j1], lay.ri_period[lay.ri_cols[j1] - lay.n_continuous])]
        add_row(entries, -inf, 0.0, f"eq6[{j}]")
        # Same condition per period: if the later order is out by t, so is the
        # earlier one.  Equivalent for binaries, much tighter for the relaxation.
        pj = lay.ri_period[lay.ri_cols[j] - lay.n_continuous]
        pj1 = lay.ri_period[lay.ri_cols[j1] - lay.n_continuous]
        for k in range(pj1.min(), pj.max()):
            entries = [(col, 1.0) for col, kk in zip(lay.ri_cols[j1], pj1) if kk <= k]
            entries += [(col, -1.0) for col, kk in zip(lay.ri_cols[j], pj) if kk <= k]
            add_row(entries, -inf, 0.0, f"eq6c[{j},{k}]")
    # Coverage cuts: if order k is not out by t-1, then by no-overtaking no
    # later order is either, so demand through t beyond what earlier orders
    # and the initial state can supply is backlogged at t.
    for a, g in enumerate(inst.items):
        base = inst.initial_fgi[g] - inst.initial_backlog[g] + inst.initial_wip[g]
        need = np.cumsum(inst.demand[g]) - base
        js = [j for j, o in enumerate(inst.orders) if o.item == g]
        for t in range(1, T):
            before = 0.0
            for j in js:
                short = need[t] - before
                before += inst.orders[j].quantity
                if short <= 1e-9:
                    break
                periods = lay.ri_period[lay.ri_cols[j] - lay.n_continuous]
                if periods.min() > t - 1 or periods.max() <= t - 1:
                    continue
                add_row([(lay.stock("B", a, t), 1.0)]
                        + [(col, short) for col, kk in zip(lay.ri_cols[j], periods) if kk <= t - 1],
                        short, inf, f"cover[{g},{t},{j}]")
    mc = inst.capacity
    for k in range(T):
        PL, L, C = lay.period("PL", k), lay.period("L", k), lay.period("C", k)
        add_row([(PL, 1.0), (C, -1.0)], -inf, mc, f"eq7[{k}]")
        for c, (slope, icpt) in enumerate(inst.cf.segments):
            entries = [(PL, 1.0), (C, -1.0)]
            if slope:
                entries.append((L, -slope))
            add_row(entries, -inf, icpt, f"eq8[{k},{c}]")
        add_row([(PL, 1.0), (L, -1.0), (C, -1.0)], -inf, 0.0, f"eq9[{k}]")
        setup_cols = []
        for a, g in enumerate(inst.items):
            setup_cols += [(col, -inst.setup[g]) for col, _ in ri_by_period_item[a][k]]
        add_row([(PL, 1.0)] + [(lay.stock("P", a, k), -inst.processing[g])
                               for a, g in enumerate(inst.items)] + setup_cols,
                0.0, 0.0, f"eq10[{k}]")
        add_row([(L, 1.0)] + [(lay.stock("W", a, k), -inst.processing[g])
                              for a, g in enumerate(inst.items)] + setup_cols,
                0.0, 0.0, f"eq11[{k}]")
    for a, g in enumerate(inst.items):
        for k in range(T):
            add_row([(lay.stock("P", a, k), 1.0), (lay.stock("W", a, k), -1.0)],
                    -inf, 0.0, f"wip[{g},{k}]")

    A = sparse.csc_matrix((vals, (rows, cols)), shape=(len(lo), lay.n_cols))
    A.sum_duplicates()
    c = np.zeros(lay.n_cols)
    for a, g in enumerate(inst.items):
        for name, cost in (("I", inst.cost_fgi[g]), ("W", inst.cost_wip[g]), ("B", inst.cost_backlog[g])):
            s = lay.block[name] + a * T
            c[s:s + T] = cost
    c[lay.block["C"]:lay.block["C"] + T] = inst.overload_cost
    col_ub = np.full(lay.n_cols, np.inf)
    col_ub[lay.n_continuous:] = 1.0
    return LinearModel(lay, c, A, np.array(lo), np.array(hi), col_ub, names)


# -- plans and certificates -------------------------------------------------------

@dataclass
class ReleasePlan:
    """Solved release assignment with all trajectories (rows: items, cols: periods)."""

    start: int
    ri: np.ndarray               # (orders, periods) 0/1
    I: np.ndarray
    W: np.ndarray
    B: np.ndarray
    P: np.ndarray
    R: np.ndarray
    L: np.ndarray
    PL: np.ndarray
    C: np.ndarray
    objective: float

    @property
    def release_period(self) -> dict[int, int]:
        return {j: self.start + int(np.argmax(row)) for j, row in enumerate(self.ri)}

    @classmethod
    def from_vector(cls, inst: ReleaseModelInstance, lay: Layout, x: np.ndarray,
                    objective: float) -> "ReleasePlan":
        G, T = lay.G, lay.T

        def stock(name):
            s = lay.block[name]
            return np.maximum(x[s:s + G * T].reshape(G, T), 0.0)

        def period(name):
            s = lay.block[name]
            return np.maximum(x[s:s + T], 0.0)

        ri = np.zeros((len(inst.orders), T))
        binaries = np.rint(x[lay.n_continuous:])
        ri[lay.ri_order, lay.ri_period] = binaries
        return cls(inst.start, ri, stock("I"), stock("W"), stock("B"), stock("P"), stock("R"),
                   period("L"), period("PL"), period("C"), objective)


@dataclass
class SolveCertificate:
    status: str                  # "optimal" or "within-gap"
    objective: float
    dual_bound: float
    gap: float
    fixed_lp_dual_bound: float   # dual objective of the LP with the incumbent's releases fixed
    nodes: int = 0
    max_residual: float = 0.0


def plan_objective(inst: ReleaseModelInstance, plan: ReleasePlan) -> float:
    total = 0.0
    for a, g in enumerate(inst.items):
        total += (inst.cost_fgi[g] * plan.I[a].sum() + inst.cost_wip[g] * plan.W[a].sum()
                  + inst.cost_backlog[g] * plan.B[a].sum())
    return float(total + inst.overload_cost * plan.C.sum())


@dataclass
class CertificateCheck:
    ok: bool
    failed: str = ""
    detail: str = ""
    max_residual: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(inst: ReleaseModelInstance, plan: ReleasePlan,
                       cert: SolveCertificate, tol: float = RESIDUAL_TOL) -> CertificateCheck:
    """Recompute every model constraint from ``plan`` and check the bounds."""
    T = inst.n_periods
    worst = 0.0

    def scaled(residual, scale):
        nonlocal worst
        r = abs(residual) / max(1.0, abs(scale))
        worst = max(worst, r)
        return r

    def fail(eq, detail):
        return CertificateCheck(False, eq, detail, worst)

    ri = plan.ri
    if ri.shape != (len(inst.orders), T):
        return fail("eq13", "release matrix has the wrong shape")
    if np.any((ri != 0) & (ri != 1)):
        return fail("eq13", "release indicators are not binary")
    for j, o in enumerate(inst.orders):
        outside = [k for k in range(T) if ri[j, k] and not o.earliest <= inst.start + k <= o.latest]
        if outside:
            return fail("eq3", f"order {j} released outside its window at {inst.start + outside[0]}")
        if ri[j].sum() != 1:
            return fail("eq3", f"order {j} released {int(ri[j].sum())} times")
    for name in ("I", "W", "B", "P", "R"):
        arr = getattr(plan, name)
        if arr.min(initial=0.0) < -tol:
            return fail("eq12", f"negative {name}")
    for name in ("L", "PL", "C"):
        if getattr(plan, name).min(initial=0.0) < -tol:
            return fail("eq12", f"negative {name}")

    qty = np.array([o.quantity for o in inst.orders])
    setup_load = np.zeros(T)
    for a, g in enumerate(inst.items):
        mine = np.array([o.item == g for o in inst.orders], dtype=bool)
        released = (ri[mine] * qty[mine, None]).sum(axis=0) if mine.any() else np.zeros(T)
        setup_load += inst.setup[g] * (ri[mine].sum(axis=0) if mine.any() else 0.0)
        for k in range(T):
            if scaled(plan.R[a, k] - released[k], released[k]) > tol:
                return fail("eq2", f"item {g} period {inst.start + k}: R={plan.R[a, k]} != {released[k]}")
        W_prev, P_prev = inst.initial_wip[g], 0.0
        net_prev = inst.initial_fgi[g] - inst.initial_backlog[g]
        for k in range(T):
            expect = W_prev + plan.R[a, k] - P_prev
            if scaled(plan.W[a, k] - expect, expect) > tol:
                return fail("eq4", f"item {g} period {inst.start + k}")
            net = net_prev + P_prev - inst.demand[g][k]
            if scaled(plan.I[a, k] - plan.B[a, k] - net, net) > tol:
                return fail("eq5", f"item {g} period {inst.start + k}")
            if plan.P[a, k] - plan.W[a, k] > tol * max(1.0, plan.W[a, k]):
                return fail("wip", f"item {g} period {inst.start + k}: production exceeds WIP")
            W_prev, P_prev = plan.W[a, k], plan.P[a, k]
            net_prev = plan.I[a, k] - plan.B[a, k]
    release = plan.release_period
    for j, j1 in inst.successor_pairs():
        if release[j] > release[j1]:
            return fail("eq6", f"order {j1} released before order {j}")
    mc = inst.capacity
    for k in range(T):
        PL, L, C = plan.PL[k], plan.L[k], plan.C[k]
        pl = sum(inst.processing[g] * plan.P[a, k] for a, g in enumerate(inst.items)) + setup_load[k]
        load = sum(inst.processing[g] * plan.W[a, k] for a, g in enumerate(inst.items)) + setup_load[k]
        if scaled(PL - pl, pl) > tol:
            return fail("eq10", f"period {inst.start + k}")
        if scaled(L - load, load) > tol:
            return fail("eq11", f"period {inst.start + k}")
        if PL - mc - C > tol * max(1.0, mc):
            return fail("eq7", f"period {inst.start + k}")
        for slope, icpt in inst.cf.segments:
            bound = slope * L + icpt + C
            if PL - bound > tol * max(1.0, bound):
                return fail("eq8", f"period {inst.start + k}: PL={PL:.6g} exceeds segment bound {bound:.6g}")
        if PL - L - C > tol * max(1.0, L):
            return fail("eq9", f"period {inst.start + k}")

    obj = plan_objective(inst, plan)
    if scaled(obj - plan.objective, obj) > tol:
        return fail("objective", f"recomputed {obj} != reported {plan.objective}")
    if scaled(obj - cert.objective, obj) > tol:
        return fail("objective", f"certificate objective {cert.objective} != {obj}")
    slack = tol * max(1.0, abs(obj))
    if cert.dual_bound > obj + slack:
        return fail("bound", f"dual bound {cert.dual_bound} above objective {obj}")
    if obj > cert.dual_bound + cert.gap * max(abs(obj), 1.0) + slack:
        return fail("bound", f"objective {obj} not within gap {cert.gap} of bound {cert.dual_bound}")
    if cert.status == "optimal" and cert.gap > 1e-6:
        return fail("bound", f"status optimal with gap {cert.gap}")
    if abs(cert.fixed_lp_dual_bound - obj) > slack:
        return fail("bound", f"fixed-assignment dual value {cert.fixed_lp_dual_bound} != {obj}")
    return CertificateCheck(True, max_residual=worst)
