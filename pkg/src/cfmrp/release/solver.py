"""Branch and bound over release periods with HiGHS linear relaxations.

Each order's binary release indicators form one choice set, so nodes are
described by an allowed release interval per order.  Branching splits the
interval of a fractional order at the median of its fractional release mass.
No-overtaking is propagated into the intervals before every relaxation.
"""

from __future__ import annotations

import heapq
import logging
import time

import highspy
import numpy as np

from .model import (
    Layout, LinearModel, ReleaseModelInstance, ReleasePlan, SolveCertificate,
    build_linear_model, plan_objective,
)

log = logging.getLogger(__name__)

INT_TOL = 1e-6
DEFAULT_GAP = 1e-6
ROUNDING_RULES = ("mode", "median", "mean", "due-1")
STRONG_CANDIDATES = 2
DIVE_EVERY = 50
DIVE_MASS = 0.05


class SolverError(RuntimeError):
    pass


class _Relaxation:
    """A HiGHS model of the LP relaxation whose release bounds can be reset."""

    def __init__(self, lm: LinearModel):
        self.lm = lm
        lay = lm.layout
        lp = highspy.HighsLp()
        lp.num_col_ = lay.n_cols
        lp.num_row_ = lm.A.shape[0]
        inf = highspy.kHighsInf
        lp.col_cost_ = lm.c
        lp.col_lower_ = np.zeros(lay.n_cols)
        lp.col_upper_ = np.where(np.isinf(lm.col_ub), inf, lm.col_ub)
        lp.row_lower_ = np.where(np.isinf(lm.row_lo), -inf, lm.row_lo)
        lp.row_upper_ = np.where(np.isinf(lm.row_hi), inf, lm.row_hi)
        A = lm.A.tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        self.h.setOptionValue("presolve", "off")
        self.h.passModel(lp)
        self.bin_idx = np.arange(lay.n_continuous, lay.n_cols, dtype=np.int32)
        self.bin_lo = np.zeros(lay.n_binary)
        self.lp_count = 0
        self.retries = 0

    def solve(self, ub: np.ndarray, lb: np.ndarray | None = None):
        lb = self.bin_lo if lb is None else lb
        self.h.changeColsBounds(self.bin_idx.size, self.bin_idx, lb, ub)
        self.h.run()
        self.lp_count += 1
        status = self.h.getModelStatus()
        if status not in (highspy.HighsModelStatus.kOptimal, highspy.HighsModelStatus.kInfeasible):
            status = self._retry()
        if status == highspy.HighsModelStatus.kInfeasible:
            return None, np.inf
        if status != highspy.HighsModelStatus.kOptimal:
            raise SolverError(f"LP relaxation ended with status {self.h.modelStatusToString(status)}")
        x = np.asarray(self.h.getSolution().col_value)
        return x, self.objective()

    def _retry(self):
        """Re-solve from scratch when the warm-started simplex gives up, then with presolve."""
        ok = (highspy.HighsModelStatus.kOptimal, highspy.HighsModelStatus.kInfeasible)
        self.h.clearSolver()
        self.h.run()
        status = self.h.getModelStatus()
        if status not in ok:
            self.h.setOptionValue("presolve", "on")
            self.h.clearSolver()
            self.h.run()
            status = self.h.getModelStatus()
            self.h.setOptionValue("presolve", "off")
        self.retries += 1
        return status

    def objective(self) -> float:
        return float(self.h.getInfo().objective_function_value)

    def dual_value(self) -> float:
        """Lagrangian dual objective of the last solve (a valid lower bound)."""
        sol = self.h.getSolution()
        y = np.asarray(sol.row_dual)
        d = np.asarray(sol.col_dual)
        lm = self.lm
        lp = self.h.getLp()
        col_lo, col_hi = np.asarray(lp.col_lower_), np.asarray(lp.col_upper_)
        row_term = np.where(y > 0, lm.row_lo, lm.row_hi)
        col_term = np.where(d > 0, col_lo, col_hi)
        row_val = np.where(y == 0, 0.0, y * np.where(np.isinf(row_term), 0.0, row_term))
        col_val = np.where(d == 0, 0.0, d * np.where(np.abs(col_term) >= highspy.kHighsInf, 0.0, col_term))
        return float(row_val.sum() + col_val.sum())


def _propagate(inst: ReleaseModelInstance, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Tighten release intervals under no-overtaking; False if empty."""
    pairs = inst.successor_pairs()
    for j, j1 in pairs:
        lo[j1] = max(lo[j1], lo[j])
    for j, j1 in reversed(pairs):
        hi[j] = min(hi[j], hi[j1])
    return bool(np.all(lo <= hi))


def _bounds(lay: Layout, inst: ReleaseModelInstance, lo, hi) -> np.ndarray:
    t = lay.ri_period + inst.start
    j = lay.ri_order
    return ((t >= lo[j]) & (t <= hi[j])).astype(float)


def _assignment(lay: Layout, n_orders: int, x: np.ndarray, start: int):
    """Per-order release mass; ``None`` entries mark fractional orders."""
    mass = x[lay.n_continuous:]
    rel = [None] * n_orders
    frac = []
    for j in range(n_orders):
        sel = lay.ri_order == j
        m = mass[sel]
        k = int(np.argmax(m))
        if m[k] >= 1 - INT_TOL:
            rel[j] = start + int(lay.ri_period[sel][k])
        else:
            frac.append((j, lay.ri_period[sel] + start, m))
    return rel, frac


def _round(inst: ReleaseModelInstance, lay: Layout, x, lo, hi, rule: str = "mode") -> np.ndarray:
    """Round the relaxation to a release assignment that respects the intervals.

    ``mode`` takes the period with the largest release mass (latest on ties),
    ``median`` and ``mean`` summarize the mass over the window, and ``due-1``
    ignores the relaxation and releases one period before due.
    """
    mass = x[lay.n_continuous:]
    release = np.zeros(len(inst.orders), dtype=np.int64)
    prev = {}
    for j, o in enumerate(inst.orders):
        sel = lay.ri_order == j
        periods = lay.ri_period[sel] + inst.start
        m = np.maximum(mass[sel], 0.0)
        if rule == "mode":
            r = periods[np.flatnonzero(m >= m.max() - INT_TOL)[-1]]
        elif rule == "median":
            r = periods[min(np.searchsorted(np.cumsum(m), 0.5 * m.sum() - INT_TOL), len(m) - 1)]
        elif rule == "mean":
            r = np.rint((periods * m).sum() / max(m.sum(), INT_TOL))
        else:
            r = o.due - 1
        r = int(np.clip(r, lo[j], hi[j]))
        if o.item in prev:
            r = max(r, prev[o.item])
        release[j] = r
        prev[o.item] = r
    return release



def _candidates(frac, lo, hi):
    """Branching candidates: (order, split period, mass above split, mass at or below)."""
    out = []
    for j, periods, mass in frac:
        keep = mass > 1e-12
        support = periods[keep]
        cum = np.cumsum(mass[keep])
        split = int(support[np.searchsorted(cum, 0.5 * cum[-1])])
        if split >= support[-1]:
            split = int(support[-2]) if support.size > 1 else split - 1
        split = min(max(split, lo[j]), hi[j] - 1)
        out.append((j, split, float(mass[periods > split].sum()), float(mass[periods <= split].sum())))
    return out


def _child(inst, lo, hi, j, split, side):
    lo, hi = lo.copy(), hi.copy()
    if side == 0:
        hi[j] = split
    else:
        lo[j] = split + 1
    return (lo, hi) if _propagate(inst, lo, hi) else None


def solve(inst: ReleaseModelInstance, time_limit: float = 60.0, gap: float = DEFAULT_GAP,
          node_limit: int | None = None) -> tuple[ReleasePlan, SolveCertificate]:
    """Minimize holding, WIP, backlog and overload cost over release periods.

    Best-bound search.  The branching order is chosen by pseudocosts (bound
    gain per unit of release mass pushed out of a child); orders without a
    pseudocost yet are scored by solving both children (strong branching).
    """
    t0 = time.perf_counter()
    lm = build_linear_model(inst)
    lay = lm.layout
    J = len(inst.orders)
    relax = _Relaxation(lm)
    lo0 = np.array([o.earliest for o in inst.orders], dtype=np.int64)
    hi0 = np.array([o.latest for o in inst.orders], dtype=np.int64)
    if not _propagate(inst, lo0, hi0):
        raise SolverError("no-overtaking leaves an order without release period")

    best_val, best_rel = np.inf, None
    pruned_bound = np.inf
    nodes = 0
    pc_sum = np.zeros((J, 2))
    pc_n = np.zeros((J, 2))

    def tol(value):
        return gap * max(abs(value), 1.0)

    def try_fixed(release):
        nonlocal best_val, best_rel
        fixed = _bounds(lay, inst, release, release)
        x, val = relax.solve(fixed, fixed)
        if x is not None and val < best_val - 1e-9 * max(abs(val), 1.0):
            best_val, best_rel = val, release.copy()

    def dive(x, lo, hi, pick):
        # Fix one fractional order per round at the earliest period carrying
        # real release mass, then re-solve, until the relaxation is integral.
        # Early fixing keeps capacity for the orders that follow.
        lo, hi = lo.copy(), hi.copy()
        while True:
            rel, frac = _assignment(lay, J, x, inst.start)
            if not frac:
                val = relax.objective()
                if val < best_val - 1e-9 * max(abs(val), 1.0):
                    set_incumbent(val, np.array(rel, dtype=np.int64))
                return
            j, periods, mass = min(frac, key=pick)
            r = int(periods[np.flatnonzero(mass > DIVE_MASS)[0]])
            lo[j] = hi[j] = r
            if not _propagate(inst, lo, hi):
                return
            x, val = relax.solve(_bounds(lay, inst, lo, hi))
            if x is None or val >= best_val - tol(best_val):
                return

    def by_due(f):
        return inst.orders[f[0]].due, f[0]

    def by_certainty(f):
        return -f[2].max(), f[0]

    def set_incumbent(val, release):
        nonlocal best_val, best_rel
        best_val, best_rel = val, release

    def choose(lo, hi, val, cands):
        mean = pc_sum.sum(axis=0) / np.maximum(pc_n.sum(axis=0), 1.0)
        untried = sorted((c for c in cands if pc_n[c[0]].min() < 1),
                         key=lambda c: (-min(c[2], c[3]), c[0]))[:STRONG_CANDIDATES]
        best_score, choice = -1.0, None
        for c in untried:
            j, split = c[0], c[1]
            gains = []
            for side in (0, 1):
                child = _child(inst, lo, hi, j, split, side)
                if child is None:
                    gains.append(np.inf)
                    continue
                _, v = relax.solve(_bounds(lay, inst, *child))
                gains.append(v - val)
                moved = c[2 + side]
                if np.isfinite(v) and moved > INT_TOL:
                    pc_sum[j, side] += (v - val) / moved
                    pc_n[j, side] += 1
            score = max(min(gains[0], 1e30), 1e-6) * max(min(gains[1], 1e30), 1e-6)
            if score > best_score:
                best_score, choice = score, c
        for c in cands:
            if c in untried:
                continue
            j = c[0]
            est = [pc_sum[j, k] / pc_n[j, k] if pc_n[j, k] else mean[k] for k in (0, 1)]
            score = max(est[0] * c[2], 1e-6) * max(est[1] * c[3], 1e-6)
            if score > best_score:
                best_score, choice = score, c
        return choice

    heap = [(-np.inf, 0, lo0, hi0)]
    counter = 1
    timed_out = False
    while heap:
        parent_bound, _, lo, hi = heapq.heappop(heap)
        if parent_bound >= best_val - tol(best_val):
            pruned_bound = min(pruned_bound, parent_bound)
            continue
        if time.perf_counter() - t0 > time_limit or (node_limit and nodes >= node_limit):
            heapq.heappush(heap, (parent_bound, 0, lo, hi))
            timed_out = True
            break
        nodes += 1
        x, val = relax.solve(_bounds(lay, inst, lo, hi))
        if x is None:
            continue
        if val >= best_val - tol(best_val):
            pruned_bound = min(pruned_bound, val)
            continue
        rel, frac = _assignment(lay, J, x, inst.start)
        if not frac:
            best_val, best_rel = val, np.array(rel, dtype=np.int64)
            continue
        if nodes == 1:
            for rule in ROUNDING_RULES:
                try_fixed(_round(inst, lay, x, lo, hi, rule))
            dive(x, lo, hi, by_due)
            dive(x, lo, hi, by_certainty)
        elif nodes % DIVE_EVERY == 0:
            dive(x, lo, hi, by_due)
        if val >= best_val - tol(best_val):
            pruned_bound = min(pruned_bound, val)
            continue
        j, split, _, _ = choose(lo, hi, val, _candidates(frac, lo, hi))
        # later child first so that it wins ties in the heap
        for side in (1, 0):
            child = _child(inst, lo, hi, j, split, side)
            if child is not None:
                heapq.heappush(heap, (val, counter, *child))
                counter += 1

    if best_rel is None:
        # time ran out before any integral point: fall back to the latest releases
        try_fixed(hi0.copy())
        if best_rel is None:
            raise SolverError("no feasible release assignment found")

    open_bound = min((b for b, *_ in heap), default=np.inf)
    lower = min(best_val, pruned_bound, open_bound)
    if not np.isfinite(lower):
        lower = best_val
    gap_achieved = max(0.0, (best_val - lower) / max(abs(best_val), 1.0))

    # Re-solve the incumbent's fixed LP for clean trajectories and its dual value.
    fixed = _bounds(lay, inst, best_rel, best_rel)
    x, val = relax.solve(fixed, fixed)
    if x is None:
        raise SolverError("incumbent assignment became infeasible")
    fixed_dual = relax.dual_value()
    plan = ReleasePlan.from_vector(inst, lay, x, val)
    plan.objective = plan_objective(inst, plan)
    status = "within-gap" if (timed_out and gap_achieved > gap) else "optimal"
    cert = SolveCertificate(status, plan.objective, min(lower, plan.objective), gap_achieved,
                            fixed_dual, nodes=nodes)
    log.debug("solved %d orders in %d nodes / %d LPs (%.3fs), status %s",
              J, nodes, relax.lp_count, time.perf_counter() - t0, status)
    return plan, cert
