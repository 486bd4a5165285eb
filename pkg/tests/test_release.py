from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from cfmrp.clearing import make_ideal, make_three_segment
from cfmrp.mrp import PlannedOrder, PlanningError
from cfmrp.production import build_ps1
from cfmrp.release import (InstanceError, ModelOrder, OracleTooLarge, ReleaseConfig,
                           ReleaseModelInstance, brute_force_oracle, build_instance,
                           build_linear_model, dump_instance, load_instance, plan_objective,
                           solve, verify_certificate)
from cfmrp.release.simplex import linprog_dense
from tiny_instances import random_instance


def one_item(orders, T=8, mc=1440.0, cf=None, demand=None, **kw):
    g = 100
    if demand is None:
        demand = np.zeros(T)
        for o in orders:
            demand[o.due - kw.get("start", 0)] += o.quantity
    args = dict(items=(g,), start=0, n_periods=T, orders=tuple(orders), processing={g: 10.0},
                setup={g: 0.0}, cost_fgi={g: 2.0}, cost_wip={g: 1.0}, cost_backlog={g: 38.0},
                cf=cf or make_ideal(mc), demand={g: demand}, max_lead=3)
    args.update(kw)
    return ReleaseModelInstance(**args)


def test_one_order_three_binaries():
    inst = one_item([ModelOrder(100, 10.0, 5, 2, 4)])
    assert build_linear_model(inst).layout.n_binary == 3


def test_continuous_column_count():
    g, h = 100, 101
    orders = [ModelOrder(g, 5.0, 4, 1, 4), ModelOrder(g, 5.0, 6, 3, 6),
              ModelOrder(h, 5.0, 5, 2, 5), ModelOrder(h, 5.0, 7, 4, 7)]
    inst = ReleaseModelInstance(
        items=(g, h), start=0, n_periods=8, orders=tuple(orders),
        processing={g: 1.0, h: 2.0}, setup={g: 0.0, h: 0.0}, cost_fgi={g: 2.0, h: 2.0},
        cost_wip={g: 1.0, h: 1.0}, cost_backlog={g: 38.0, h: 38.0}, cf=make_ideal(100.0),
        demand={}, max_lead=3)
    # I, W, B, P, R per item and period; L, PL, C per period
    assert build_linear_model(inst).layout.n_continuous == 8 * (5 * 2 + 3)


def test_overload_cost_for_ps1_machine():
    s = build_ps1()
    res = s.resources[0]
    orders = [PlannedOrder(0, 100, 10.0, 3), PlannedOrder(1, 101, 10.0, 4)]
    inst, _ = build_instance(orders, [], res, s, make_ideal(1440.0), 0, 14)
    assert inst.overload_cost == 4000.0


def test_build_instance_window_and_errors():
    s = build_ps1()
    res = s.resources[1]
    orders = [PlannedOrder(0, 102, 10.0, 6)]
    inst, _ = build_instance(orders, [], res, s, make_ideal(1440.0), 3, 14)
    assert (inst.orders[0].earliest, inst.orders[0].latest) == (3, 6)
    inst, _ = build_instance(orders, [], res, s, make_ideal(1440.0), 3, 14,
                             ReleaseConfig(allow_due_period=False))
    assert inst.orders[0].latest == 5
    with pytest.raises(PlanningError):
        build_instance([PlannedOrder(0, 100, 1.0, 5)], [], res, s, make_ideal(1440.0), 0, 14)
    with pytest.raises(PlanningError):
        build_instance([PlannedOrder(0, 102, 1.0, 40)], [], res, s, make_ideal(1440.0), 0, 14)


def test_build_instance_open_orders_are_wip():
    s = build_ps1()
    res = s.resources[1]
    open_order = PlannedOrder(7, 103, 12.0, 2, 1, True)
    inst, _ = build_instance([PlannedOrder(0, 102, 10.0, 6)], [open_order], res, s,
                             make_ideal(1440.0), 3, 14)
    assert inst.initial_wip[103] == 12.0
    assert inst.demand[103][0] == 12.0     # already late: owed now


def test_window_outside_horizon_rejected():
    with pytest.raises(InstanceError):
        one_item([ModelOrder(100, 10.0, 9, 6, 9)], T=8, demand=np.zeros(8))


def test_single_order_released_latest():
    inst = one_item([ModelOrder(100, 10.0, 5, 2, 4)])
    plan, cert = solve(inst)
    assert plan.release_period == {0: 4}
    assert cert.status == "optimal"
    assert brute_force_oracle(inst) == pytest.approx(cert.objective, rel=1e-9)
    assert verify_certificate(inst, plan, cert)


def test_no_overtaking():
    inst = one_item([ModelOrder(100, 30.0, 5, 2, 5), ModelOrder(100, 80.0, 6, 3, 6)], mc=1000)
    plan, _ = solve(inst)
    rel = plan.release_period
    assert rel[0] <= rel[1]


def test_overload_uses_external_capacity():
    # a setup of 600 minutes is charged in the release period and exceeds capacity 500
    inst = one_item([ModelOrder(100, 20.0, 4, 1, 3)], T=6, mc=500.0, setup={100: 600.0})
    plan, cert = solve(inst)
    assert plan.C.sum() >= 100.0 - 1e-6
    assert cert.objective >= inst.overload_cost * plan.C.sum() - 1e-6


def test_oracle_empty_order_set():
    inst = one_item([], T=4, initial_fgi={100: 5.0}, initial_wip={100: 3.0})
    # FGI 5 and WIP 3 stay put for four periods (WIP may finish: it turns into FGI)
    value = brute_force_oracle(inst)
    plan, cert = solve(inst)
    assert value == pytest.approx(cert.objective)
    assert value == pytest.approx(plan_objective(inst, plan))


def test_oracle_refuses_large_instances():
    inst = one_item([ModelOrder(100, 1.0, d, d - 3, d) for d in range(3, 8)], T=9)
    with pytest.raises(OracleTooLarge):
        brute_force_oracle(inst)


@pytest.mark.parametrize("seed", range(30))
def test_solver_matches_oracle(seed):
    inst = random_instance(seed)
    plan, cert = solve(inst)
    ref = brute_force_oracle(inst)
    assert abs(cert.objective - ref) <= 1e-6 * max(1.0, abs(ref))
    assert verify_certificate(inst, plan, cert)


@pytest.mark.parametrize("seed", range(5))
def test_oracle_not_above_hand_plans(seed):
    inst = random_instance(seed + 100)
    ref, arg = brute_force_oracle(inst, return_assignment=True)
    from cfmrp.release.oracle import continuous_cost, feasible_assignments
    for k, release in enumerate(feasible_assignments(inst)):
        if k > 20:
            break
        assert ref <= continuous_cost(inst, release) + 1e-6


def corrupt(plan, **changes):
    return dataclasses.replace(plan, **{k: v.copy() for k, v in changes.items()})


def test_verify_detects_double_release():
    inst = one_item([ModelOrder(100, 10.0, 5, 2, 4)])
    plan, cert = solve(inst)
    ri = plan.ri.copy()
    ri[0, 2:5] = 1
    check = verify_certificate(inst, corrupt(plan, ri=ri), cert)
    assert not check and check.failed == "eq3"


def test_verify_detects_clearing_violation():
    inst = one_item([ModelOrder(100, 100.0, 5, 2, 4)], cf=make_three_segment(1440.0, 0.4))
    plan, cert = solve(inst)
    k = int(np.argmax(plan.PL))
    PL = plan.PL.copy()
    PL[k] = plan.L[k] + 50.0
    check = verify_certificate(inst, corrupt(plan, PL=PL), cert)
    assert not check and check.failed in ("eq8", "eq9", "eq10")


def test_instance_round_trip(tmp_path):
    inst = random_instance(7)
    dump_instance(inst, tmp_path / "inst.json")
    back = load_instance(tmp_path / "inst.json")
    assert solve(back)[1].objective == pytest.approx(solve(inst)[1].objective, rel=1e-12)


def test_node_limit_still_certified():
    inst = random_instance(3, max_items=3, max_orders=4)
    plan, cert = solve(inst, node_limit=1)
    assert cert.status in ("optimal", "within-gap")
    assert verify_certificate(inst, plan, cert)
    assert cert.dual_bound <= cert.objective + 1e-9


def test_deterministic():
    inst = random_instance(11)
    a, b = solve(inst), solve(inst)
    assert a[0].release_period == b[0].release_period and a[1].objective == b[1].objective


def scale_costs(inst, f):
    return dataclasses.replace(
        inst, cost_fgi={g: v * f for g, v in inst.cost_fgi.items()},
        cost_wip={g: v * f for g, v in inst.cost_wip.items()},
        cost_backlog={g: v * f for g, v in inst.cost_backlog.items()},
        overload_cost=inst.overload_cost * f)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 3.0, 10.0]))
def test_scaling_covariance(seed, f):
    inst = random_instance(seed)
    base = solve(inst)[1].objective
    assert solve(scale_costs(inst, f))[1].objective == pytest.approx(f * base, rel=1e-6, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_more_capacity_never_costs_more(seed):
    inst = random_instance(seed, mc=300.0)
    bigger = dataclasses.replace(inst, cf=make_ideal(600.0), overload_cost=inst.overload_cost)
    assert solve(bigger)[1].objective <= solve(inst)[1].objective + 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_plans_respect_no_overtaking(seed):
    inst = random_instance(seed)
    plan, _ = solve(inst)
    rel = plan.release_period
    assert all(rel[j] <= rel[j1] for j, j1 in inst.successor_pairs())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_light_load_needs_no_overtime(seed):
    rng = np.random.default_rng(seed)
    T = 8
    orders = [ModelOrder(100, float(rng.uniform(1, 10)), d, d - 3, d) for d in range(3, 7)]
    inst = one_item(orders, T=T, mc=1440.0, setup={100: 72.0})
    # every period's total workload is at most 4 * (10 * 10 + 72) minutes
    plan, _ = solve(inst)
    assert plan.C.max() == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dense_simplex_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n, m = 6, 4
    A = rng.uniform(-1, 2, (m, n))
    x0 = rng.uniform(0, 1, n)
    b = A @ x0 + rng.uniform(0, 1, m)
    A_eq = rng.uniform(0, 1, (1, n))
    b_eq = A_eq @ x0
    c = rng.uniform(0.1, 2, n)
    _, ours = linprog_dense(c, A, b, A_eq, b_eq)
    ref = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, method="highs")
    assert ours == pytest.approx(ref.fun, rel=1e-7, abs=1e-9)


def test_recovers_when_relaxation_status_is_unknown():
    # warm-started simplex used to stop with status Unknown on this instance
    inst = load_instance(Path(__file__).parent / "data" / "lp_status_unknown.json")
    plan, cert = solve(inst, node_limit=1)
    assert verify_certificate(inst, plan, cert)
