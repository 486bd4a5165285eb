from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from cfmrp import experiment as ex
from cfmrp.cli import main
from cfmrp.production import UTILIZATION_DEMAND

PLANS = Path(__file__).resolve().parent.parent / "plans"

TINY = """\
system = ps1
utilization = 80%
demand = 0.5
mode = mrp-backward
plt = 1, 2
replications = 3
run_length = 12
warmup = 2
base_seed = 3
"""


def test_parse_full_plan():
    plan = ex.parse_plan_text("""
# comment line
system = ps1
utilization = 80%, 0.85
demand = 0, 0.25/0.75   # trailing comment
mode = mrp-backward, cf-optimized
plt = 1, 2
ss = 0, 0.2
fop = 1
cf = ideal, low
window = d, d-1
replications = 4
node_limit = none
""")
    assert plan.utilization == (0.8, 0.85)
    assert plan.demand == ((0.0, 0.0), (0.25, 0.75))
    assert plan.node_limit is None and plan.replications == 4
    # per utilization and demand: 2 PLT + 2 CF x 2 windows, times 2 SS
    assert len(plan.scenarios()) == 2 * 2 * (2 + 4) * 2


def test_utilization_85_maps_to_44_12():
    plan = ex.parse_plan_text("utilization = 85%\n")
    scen = plan.scenarios()[0]
    assert UTILIZATION_DEMAND[scen.utilization] == 44.12
    cfg = scen.sim_config(0)
    assert set(cfg.demand.long_term_forecast.values()) == {44.12}


def test_bundled_one_update_plan_is_full_grid():
    plan = ex.parse_plan(PLANS / "ps1_one_update.plan")
    assert len(plan.scenarios()) == 3 * 7 * (3 + 1) * 3 * 7
    for path in PLANS.glob("*.plan"):
        assert ex.parse_plan(path).scenarios()


@pytest.mark.parametrize("text, line, words", [
    ("system = ps1\nbogus = 1\n", 2, "unknown key"),
    ("fop = 1\nfop = 2\n", 2, "already set"),
    ("plt = 1\nss = \n", 2, "empty"),
    ("utilization = 80%\nplt = one\n", 2, "integers"),
    ("demand = 0.5/x\n", 1, "numbers"),
    ("demand = 0.5/0.1/0\n", 1, "alpha"),
    ("mode = mrp-backward\n\ncf = medium, huge\n", 3, "clearing function"),
    ("utilization = 75%\n", 1, "no demand level"),
    ("replications = 0\n", 1, "at least 1"),
    ("run_length = 10\nwarmup = 10\n", 2, "warmup"),
    ("just words\n", 1, "key = value"),
    ("system = ps1, ps2\n", 1, "single value"),
])
def test_parse_errors_carry_line_numbers(text, line, words):
    with pytest.raises(ex.PlanError) as err:
        ex.parse_plan_text(text)
    assert f"line {line}:" in str(err.value) and words in str(err.value)


def test_empty_grid_rejected():
    with pytest.raises(ex.PlanError, match="empty"):
        ex.ExperimentPlan(fop=())


def test_seeds_are_scenario_independent():
    plan = ex.parse_plan_text(TINY)
    ts = ex.tasks(plan)
    assert len(ts) == 6
    assert [t.seed for t in ts] == [3 ^ 0, 3 ^ 1, 3 ^ 2] * 2
    assert ex.row_id(12, 3) == "s0012r003"


def test_rows_and_identical_bytes(tmp_path):
    plan = ex.parse_plan_text(TINY)
    a = ex.write_rows(ex.run_grid(plan), tmp_path / "a.csv")
    b = ex.write_rows(ex.run_grid(plan, workers=2), tmp_path / "b.csv")
    assert len(a) == 6 and all(r["status"] == "ok" for r in a)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = next(csv.reader(open(tmp_path / "a.csv")))
    assert tuple(header) == ex.ROW_FIELDS


def test_failure_is_a_row(tmp_path):
    plan = ex.parse_plan_text(TINY.replace("system = ps1", f"system = {tmp_path}/missing.ini"))
    rows = list(ex.run_grid(plan))
    assert len(rows) == 6
    assert all(r["status"].startswith("error") for r in rows)
    assert rows[0]["cost_per_period"] == ""


def fake_rows():
    rows = []
    costs = {(1, 0.0): [10.0, 12.0], (2, 0.0): [9.0, 9.5], (3, 0.0): [20.0, 1.0]}
    for (plt, ss), values in costs.items():
        for r, c in enumerate(values):
            row = {k: "" for k in ex.ROW_FIELDS}
            row.update(system="ps1", utilization=0.8, alpha=0.5, beta=0.0, mode="mrp-backward",
                       plt=plt, ss=ss, fop=1, cf="", window="", status="ok", replication=r,
                       cost_per_period=c, cost_fgi=c / 2, cost_wip=c / 4, cost_tardiness=c / 4,
                       cost_inventory=3 * c / 4, service_level=0.9, aplt_mean=plt)
            rows.append(row)
    return rows


def test_select_min_cost_fixture():
    best = ex.select_min_cost(fake_rows())
    assert len(best) == 1
    assert best[0]["plt"] == "2" and best[0]["cost_per_period"] == pytest.approx(9.25)


def test_select_min_cost_single_row():
    row = fake_rows()[:1]
    best = ex.select_min_cost(row)
    assert best[0]["cost_per_period"] == 10.0 and best[0]["replications"] == 1


def test_aggregation_is_exact():
    rows = fake_rows()
    for s in ex.aggregate(rows):
        raw = [r["cost_per_period"] for r in rows if str(r["plt"]) == s["plt"]]
        assert abs(s["cost_per_period"] - np.mean(raw)) <= 1e-9
        assert s["cost_per_period_sd"] == pytest.approx(np.std(raw, ddof=1))


def test_failed_rows_left_out_of_means():
    rows = fake_rows()
    rows[0]["status"] = "error: boom"
    s = [a for a in ex.aggregate(rows) if a["plt"] == "1"][0]
    assert s["replications"] == 1 and s["cost_per_period"] == 12.0


def test_report_tables(tmp_path):
    paths = ex.write_report(fake_rows(), tmp_path)
    assert {p.name for p in paths} >= {"scenario_means.csv", "min_cost.csv"}
    best = ex.read_rows(tmp_path / "min_cost.csv")
    assert [b["plt"] for b in best] == ["2"]


def test_cli_run_replay_report(tmp_path, capsys):
    plan = tmp_path / "tiny.plan"
    plan.write_text(TINY)
    out = tmp_path / "out"
    assert main(["run", str(plan), "--out-dir", str(out), "--workers", "1"]) == 0
    manifest = json.loads((out / "tiny.manifest.json").read_text())
    assert manifest["plan_sha256"] == ex.plan_digest(TINY)
    assert len(manifest["rows"]) == 6 and "numpy" in manifest["versions"]
    rows = ex.read_rows(out / "tiny.csv")
    rid = rows[4]["row_id"]
    assert main(["replay", str(out / "tiny.manifest.json"), rid, "--csv",
                 str(out / "tiny.csv")]) == 0
    assert "identical" in capsys.readouterr().out
    assert main(["report", str(out / "tiny.csv"), "--out-dir", str(out / "rep")]) == 0
    assert (out / "rep" / "min_cost.csv").exists()


def test_cli_seed_override(tmp_path):
    plan = tmp_path / "tiny.plan"
    plan.write_text(TINY.replace("replications = 3", "replications = 1").replace("plt = 1, 2", "plt = 1"))
    assert main(["run", str(plan), "--out-dir", str(tmp_path), "--seed", "11"]) == 0
    assert ex.read_rows(tmp_path / "tiny.csv")[0]["seed"] == "11"


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.plan"
    bad.write_text("fop = 1\nnope = 2\n")
    assert main(["run", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "line 2" in capsys.readouterr().err
    failing = tmp_path / "failing.plan"
    failing.write_text(TINY.replace("system = ps1", "system = missing.ini"))
    assert main(["run", str(failing), "--out-dir", str(tmp_path)]) == 1
    assert main(["run", str(tmp_path / "absent.plan")]) == 2
    assert main(["validate", "ps1"]) == 0
    assert "M1.2" in capsys.readouterr().out
    assert main(["validate", str(tmp_path / "nothing.ini")]) == 1
