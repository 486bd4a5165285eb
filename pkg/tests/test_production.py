from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from cfmrp.production import (
    COMPONENT, END_ITEM, RAW_MATERIAL, UTILIZATION_DEMAND, BomEdge, Item, ProductionSystem,
    Resource, SystemDefinitionError, build_ps1, build_ps2, compute_llc, dumps_system,
    loads_system, planned_utilization, resolve_system,
)


def test_ps1_llc():
    s = build_ps1()
    assert s.llc[100] == 0 and s.llc[200] == 1 and s.llc[300] == 2
    assert s.llc[201] == 1


def test_llc_single_item():
    assert compute_llc([], [Item(1, END_ITEM, 1.0)]) == {1: 0}


def test_llc_diamond():
    bom = [BomEdge(1, 2), BomEdge(1, 3), BomEdge(2, 4), BomEdge(3, 4)]
    assert compute_llc(bom, [1, 2, 3, 4])[4] == 2


def test_llc_longest_chain():
    # 1 -> 2 -> 3 and 1 -> 3 directly: 3 sits below the longer chain
    bom = [BomEdge(1, 2), BomEdge(2, 3), BomEdge(1, 3)]
    assert compute_llc(bom, [1, 2, 3]) == {1: 0, 2: 1, 3: 2}


def test_llc_cycle_rejected():
    with pytest.raises(SystemDefinitionError):
        compute_llc([BomEdge(1, 2), BomEdge(2, 1)], [1, 2])


@settings(max_examples=50, deadline=None)
@given(st.permutations([BomEdge(1, 2), BomEdge(1, 3), BomEdge(2, 4), BomEdge(3, 4),
                        BomEdge(4, 5), BomEdge(2, 5)]))
def test_llc_order_independent(edges):
    assert compute_llc(edges, [1, 2, 3, 4, 5]) == {1: 0, 2: 1, 3: 1, 4: 2, 5: 3}


def test_ps1_routing():
    s = build_ps1()
    assert s.items[103].processing_time == 18.972
    assert s.resource_of(103).id == "M1.2"
    assert s.items[200].setup_time_mean == 72.0
    assert {r.id: r.items for r in s.resources} == {
        "M1.1": (100, 101), "M1.2": (102, 103), "M2.1": (200, 201)}
    assert all(r.capacity_minutes == 1440 for r in s.resources)


def test_ps1_costs():
    s = build_ps1()
    assert (s.items[100].cost_fgi, s.items[100].cost_wip, s.items[100].cost_backlog) == (2, 1, 38)
    assert (s.items[200].cost_fgi, s.items[200].cost_wip, s.items[200].cost_backlog) == (1, 0.5, 0)


def test_ps1_appendix_flag():
    assert build_ps1().items[100].processing_time == 15.912
    assert build_ps1(appendix_item100=True).items[100].processing_time == 15.1912


def test_ps2_structure():
    s = build_ps2()
    assert len(s.end_items) == 32 and len(s.resources) == 16
    assert {e.child for e in s.children(300)} == {400}
    assert {e.parent for e in s.parents(300)} == {200, 201}
    assert s.resource_of(300).id == s.resource_of(304).id == "M3.1"
    assert s.items[400].setup_time_mean == 144.0
    assert s.items[100].setup_time_mean == 18.0
    assert s.items[200].setup_time_mean == 36.0
    assert s.llc[400] == 3 and s.llc[500] == 4


def test_ps2_bom_rule():
    s = build_ps2()
    for g in range(100, 132):
        assert [e.child for e in s.children(g)] == [200 + (g - 100) // 2]


def test_utilization_ps1_90():
    u = planned_utilization(build_ps1(), 47.06)
    assert u["M1.2"] == pytest.approx(1296.03 / 1440, abs=1e-4)
    assert u["M2.1"] == pytest.approx(0.9, abs=0.005)


def test_utilization_levels_ps1():
    s = build_ps1()
    for level, x in UTILIZATION_DEMAND.items():
        u = planned_utilization(s, x)
        assert abs(u["M1.2"] - level) < 0.005 and abs(u["M2.1"] - level) < 0.005


def test_utilization_ps2_every_machine():
    u = planned_utilization(build_ps2(), 47.06)
    assert all(abs(v - 0.9) < 0.005 for v in u.values()), u


def test_zero_demand_zero_utilization():
    assert all(v == 0 for v in planned_utilization(build_ps1(), 0.0).values())


def test_validation_rejects_bad_definitions():
    a = Item(1, END_ITEM, 5.0, 10.0, 2, 1, 38)
    b = Item(2, COMPONENT, 5.0, 10.0, 1, 0.5)
    with pytest.raises(SystemDefinitionError):      # dangling routing reference
        ProductionSystem({1: a}, (), (Resource("M", 1440, (1, 9)),))
    with pytest.raises(SystemDefinitionError):      # item without a resource
        ProductionSystem({1: a, 2: b}, (BomEdge(1, 2),), (Resource("M", 1440, (1,)),))
    with pytest.raises(SystemDefinitionError):      # resource shared across levels
        ProductionSystem({1: a, 2: b}, (BomEdge(1, 2),), (Resource("M", 1440, (1, 2)),))
    with pytest.raises(SystemDefinitionError):      # backlog cost on a component
        ProductionSystem({2: Item(2, COMPONENT, 5.0, 0, 1, 0.5, 3)}, (),
                         (Resource("M", 1440, (2,)),))
    with pytest.raises(SystemDefinitionError):      # raw material routed to a machine
        ProductionSystem({1: a, 3: Item(3, RAW_MATERIAL)}, (BomEdge(1, 3),),
                         (Resource("M", 1440, (1, 3)),))


@pytest.mark.parametrize("build", [build_ps1, build_ps2])
def test_system_file_round_trip(build):
    s = build()
    back = loads_system(dumps_system(s), name=s.name)
    assert dict(back.items) == dict(s.items)
    assert sorted(back.bom, key=lambda e: (e.parent, e.child)) == sorted(s.bom, key=lambda e: (e.parent, e.child))
    assert back.resources == s.resources


def test_system_file_errors():
    with pytest.raises(SystemDefinitionError, match="missing section"):
        loads_system("[items]\n1 = end-item 2 1 38\n")
    with pytest.raises(SystemDefinitionError, match="expected a number"):
        loads_system("[items]\n1 = end-item x 1 38\n[resources]\nM = 1440 1\n[routing]\n1 = 5 10\n")


def test_resolve_system_presets(tmp_path):
    assert resolve_system("ps1").name == "ps1"
    assert resolve_system("ps1-appendix").items[100].processing_time == 15.1912
    path = tmp_path / "mine.ini"
    path.write_text(dumps_system(build_ps1()))
    assert resolve_system(str(path)).name == "mine"
