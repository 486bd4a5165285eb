"""Exhaustive reference solver for tiny release instances.

Enumerates every release assignment that respects the order windows and
no-overtaking, solves the remaining continuous problem with the dense
simplex in :mod:`.simplex`, and returns the cheapest objective.  It shares no
model-building code with the branch-and-bound solver.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import ReleaseModelInstance
from .simplex import linprog_dense

MAX_ITEMS, MAX_ORDERS, MAX_PERIODS = 3, 4, 8


class OracleTooLarge(ValueError):
    pass


def continuous_cost(inst: ReleaseModelInstance, release: dict[int, int]) -> float:
    """Optimal cost once every order's release period is fixed."""
    items, T = inst.items, inst.n_periods
    G = len(items)
    n = 4 * G * T + T          # I, W, B, P per item-period, then C per period

    def I(a, k): return a * T + k
    def W(a, k): return G * T + a * T + k
    def B(a, k): return 2 * G * T + a * T + k
    def P(a, k): return 3 * G * T + a * T + k
    def C(k): return 4 * G * T + k

    released = np.zeros((G, T))
    setup_load = np.zeros(T)
    for j, o in enumerate(inst.orders):
        a, k = items.index(o.item), release[j] - inst.start
        released[a, k] += o.quantity
        setup_load[k] += inst.setup[o.item]

    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for a, g in enumerate(items):
        for k in range(T):
            row = np.zeros(n)
            row[W(a, k)] = 1.0
            rhs = released[a, k]
            if k:
                row[W(a, k - 1)] = -1.0
                row[P(a, k - 1)] = 1.0
            else:
                rhs += inst.initial_wip[g]
            A_eq.append(row)
            b_eq.append(rhs)

            row = np.zeros(n)
            row[I(a, k)], row[B(a, k)] = 1.0, -1.0
            rhs = -inst.demand[g][k]
            if k:
                row[I(a, k - 1)], row[B(a, k - 1)], row[P(a, k - 1)] = -1.0, 1.0, -1.0
            else:
                rhs += inst.initial_fgi[g] - inst.initial_backlog[g]
            A_eq.append(row)
            b_eq.append(rhs)

            row = np.zeros(n)
            row[P(a, k)], row[W(a, k)] = 1.0, -1.0
            A_ub.append(row)
            b_ub.append(0.0)

    p = np.array([inst.processing[g] for g in items])
    for k in range(T):
        # processed load = p.P + S, system load = p.W + S (S: setup load of releases)
        S = setup_load[k]
        for slope, icpt in list(inst.cf.segments) + [(0.0, inst.capacity), (1.0, 0.0)]:
            row = np.zeros(n)
            for a in range(G):
                row[P(a, k)] = p[a]
                row[W(a, k)] -= slope * p[a]
            row[C(k)] = -1.0
            A_ub.append(row)
            b_ub.append(icpt + slope * S - S)

    c = np.zeros(n)
    for a, g in enumerate(items):
        for k in range(T):
            c[I(a, k)] = inst.cost_fgi[g]
            c[W(a, k)] = inst.cost_wip[g]
            c[B(a, k)] = inst.cost_backlog[g]
    for k in range(T):
        c[C(k)] = inst.overload_cost
    _, value = linprog_dense(c, np.array(A_ub), np.array(b_ub), np.array(A_eq), np.array(b_eq))
    return value


def feasible_assignments(inst: ReleaseModelInstance):
    pairs = inst.successor_pairs()
    for combo in itertools.product(*(o.window for o in inst.orders)):
        if all(combo[j] <= combo[j1] for j, j1 in pairs):
            yield dict(enumerate(combo))


def brute_force_oracle(inst: ReleaseModelInstance, return_assignment: bool = False):
    """Minimum objective over all release assignments of a tiny instance."""
    if (len(inst.items) > MAX_ITEMS or len(inst.orders) > MAX_ORDERS
            or inst.n_periods > MAX_PERIODS):
        raise OracleTooLarge(
            f"oracle handles at most {MAX_ITEMS} items, {MAX_ORDERS} orders, "
            f"{MAX_PERIODS} periods")
    best, arg = np.inf, None
    for release in feasible_assignments(inst):
        value = continuous_cost(inst, release)
        if value < best - 1e-12 * max(1.0, abs(value)):
            best, arg = value, release
    if arg is None:
        best, arg = continuous_cost(inst, {}), {}
    return (best, arg) if return_assignment else best
