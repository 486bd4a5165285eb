from __future__ import annotations

import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfmrp.demand import DemandModelParams, advance_one_period, init_forecasts
from cfmrp.mrp import (CF_OPTIMIZED, MRP_BACKWARD, PlannedOrder, PlanningError, PlanningParams,
                       PlanningState, backward_schedule, bom_explode, dump_plan, fop_lotsize,
                       mrp_plan, netting)
from cfmrp.production import build_ps1, build_ps2
from cfmrp.release import CfReleasePlanner, ReleaseConfig


def test_netting_examples():
    z = np.zeros(5)
    assert netting(z, 30, z, z, 0).tolist() == [0] * 5
    assert netting([50], 30, [0], [0], 10).tolist() == [30]
    assert netting([20, 20], 0, [0, 0], [0, 0], 0).tolist() == [20, 20]


def test_netting_counts_receipts():
    # period 1 ends at 5 units, period 2 needs 20 - 5 - 10
    assert netting([20, 20, 20], 0, [0, 25, 0], [0, 0, 10], 0).tolist() == [20, 0, 5]


def test_fop_examples():
    orders = fop_lotsize([10, 20, 30, 40], 2, start=1)
    assert [(o.due_period, o.quantity) for o in orders] == [(1, 30), (3, 70)]
    lfl = fop_lotsize([5, 0, 7, 1], 1)
    assert [(o.due_period, o.quantity) for o in lfl] == [(0, 5), (2, 7), (3, 1)]
    assert fop_lotsize([0, 0, 0], 3) == []


def test_fop_window_starts_at_first_positive():
    orders = fop_lotsize([0, 4, 0, 0, 6, 1], 3)
    assert [(o.due_period, o.quantity) for o in orders] == [(1, 4), (4, 7)]


@given(st.lists(st.floats(0, 100), min_size=1, max_size=20), st.integers(1, 4))
def test_fop_conserves_quantity(net, k):
    orders = fop_lotsize(net, k)
    assert sum(o.quantity for o in orders) == pytest.approx(sum(net), abs=1e-6)


@given(st.integers(1, 30), st.integers(1, 4), st.floats(0.5, 50))
def test_fop_order_count(h, k, x):
    assert len(fop_lotsize([x] * h, k)) == math.ceil(h / k)


def test_backward_schedule_examples():
    o = backward_schedule([PlannedOrder(0, 100, 5.0, 10)], 3, now=0)[0]
    assert o.release_period == 7
    o = backward_schedule([PlannedOrder(0, 100, 5.0, 2)], 3, now=1)[0]
    assert o.release_period == 1
    o = backward_schedule([PlannedOrder(0, 100, 5.0, 9)], 1, now=0)[0]
    assert o.release_period == 8


def test_bom_explode_examples():
    s = build_ps1()
    gross = bom_explode([PlannedOrder(0, 100, 40.0, 8, 7)], s, 0, 14)
    assert gross[200][7] == 40 and gross[200].sum() == 40
    gross = bom_explode([PlannedOrder(0, 100, 40.0, 8, 7), PlannedOrder(1, 101, 5.0, 8, 7)],
                        s, 0, 14)
    assert gross[200][7] == 45
    gross = bom_explode([PlannedOrder(0, 100, 10.0, 3, 2)], build_ps2(), 0, 14)
    assert gross == {200: pytest.approx(np.eye(14)[2] * 10)}


def test_bom_explode_needs_release():
    with pytest.raises(PlanningError):
        bom_explode([PlannedOrder(0, 100, 1.0, 3)], build_ps1(), 0, 5)


def ps1_state(system, now=0, stock=0.0):
    return PlanningState(now=now, net_inventory={g: stock for g in system.produced_items},
                         horizon=14)


def deterministic_forecasts(x=47.06, periods=1):
    fs = init_forecasts(DemandModelParams({g: x for g in (100, 101, 102, 103)}), 60)
    for _ in range(periods):
        advance_one_period(fs)
    return fs


def test_mrp_plan_deterministic_ps1():
    s = build_ps1()
    plan = mrp_plan(ps1_state(s), deterministic_forecasts(), PlanningParams(1, 0, 1), s)
    for g in (100, 101, 102, 103):
        orders = plan.items[g].orders
        assert [o.due_period for o in orders] == list(range(14))
        assert all(o.quantity == pytest.approx(47.06) for o in orders)
        assert all(o.release_period == max(o.due_period - 1, 0) for o in orders)
    # components follow the parents' releases, again lot for lot
    comp = plan.items[200].orders
    assert comp[0].quantity == pytest.approx(2 * 47.06 * 2)   # releases at 0 and 1 both land at 0
    assert plan.releases_due(0)[0].due_period == 0


def test_mrp_plan_without_forecasts_is_empty():
    s = build_ps1()
    plan = mrp_plan(ps1_state(s), None, PlanningParams(), s)
    assert plan.orders() == []


def test_mrp_plan_needs_optimizer_in_cf_mode():
    s = build_ps1()
    with pytest.raises(PlanningError):
        mrp_plan(ps1_state(s), None, PlanningParams(mode=CF_OPTIMIZED), s)


def test_mrp_plan_cf_mode_windows():
    s = build_ps1()
    planner = CfReleasePlanner("ideal", ReleaseConfig())
    state = ps1_state(s, stock=100.0)
    plan = mrp_plan(state, deterministic_forecasts(), PlanningParams(mode=CF_OPTIMIZED), s, planner)
    assert plan.orders()
    for o in plan.orders():
        assert o.due_period - 4 <= o.release_period <= o.due_period
        assert o.release_period >= state.now
    assert planner.solves == 3


def test_mrp_plan_safety_stock_floor():
    s = build_ps1()
    ss = {g: 10.0 for g in s.produced_items}
    state = PlanningState(now=0, net_inventory={g: 0.0 for g in s.produced_items},
                          safety_stock=ss, horizon=14)
    plan = mrp_plan(state, deterministic_forecasts(), PlanningParams(1, 0.2, 1), s)
    for g in s.produced_items:
        assert (plan.items[g].projected >= 10.0 - 1e-9).all()
        assert (plan.items[g].net >= 0).all()


def test_mrp_plan_is_idempotent():
    s = build_ps1()
    fs = deterministic_forecasts(44.12, 3)
    state = ps1_state(s, now=2, stock=30.0)
    a = mrp_plan(state, fs, PlanningParams(2, 0, 2), s)
    b = mrp_plan(copy.deepcopy(state), fs, PlanningParams(2, 0, 2), s)
    key = lambda p: [(o.item, o.due_period, o.release_period, o.quantity) for o in p.orders()]
    assert key(a) == key(b)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.floats(0, 1.2), st.floats(0, 200))
def test_lot_sizes_match_net_requirements(plt, fop, ss, stock):
    s = build_ps1()
    avg = s.average_demand(41.18)
    state = PlanningState(now=0, net_inventory={g: stock for g in s.produced_items},
                          safety_stock={g: ss * avg[g] for g in s.produced_items}, horizon=14)
    plan = mrp_plan(state, deterministic_forecasts(41.18), PlanningParams(plt, ss, fop), s)
    for g, p in plan.items.items():
        assert sum(o.quantity for o in p.orders) == pytest.approx(p.net.sum(), abs=1e-6)
        assert all(o.release_period < o.due_period or o.release_period == 0 for o in p.orders)


def test_dump_plan(tmp_path):
    s = build_ps1()
    plan = mrp_plan(ps1_state(s), deterministic_forecasts(), PlanningParams(), s)
    dump_plan([plan], tmp_path / "plan.csv", MRP_BACKWARD)
    lines = (tmp_path / "plan.csv").read_text().splitlines()
    assert lines[0] == "period,item,due,release,quantity,mode"
    assert len(lines) == 1 + len(plan.orders())


def test_planning_params_validation():
    for bad in (dict(planned_lead_time=0), dict(fop=0), dict(safety_stock_multiplier=-1),
                dict(mode="push")):
        with pytest.raises(ValueError):
            PlanningParams(**bad)
