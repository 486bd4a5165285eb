"""Run a plan file end to end: CSV rows, manifest, replay and report.

Same steps as ``cfmrp run``, ``cfmrp replay`` and ``cfmrp report``, done
through the library on the bundled smoke plan.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from cfmrp import experiment as ex

plan_path = Path(__file__).resolve().parent.parent / "plans" / "smoke.plan"
out = Path(tempfile.mkdtemp(prefix="cfmrp-demo-"))

text = plan_path.read_text()
plan = ex.parse_plan(plan_path)
manifest = ex.build_manifest(plan, text, str(plan_path))
ex.write_manifest(manifest, out / "smoke.manifest.json")
rows = ex.write_rows(ex.run_grid(plan), out / "smoke.csv")
print(f"{len(rows)} rows written to {out / 'smoke.csv'}")

rid = rows[-1]["row_id"]
again = ex.replay(out / "smoke.manifest.json", rid)
stored = ex.read_rows(out / "smoke.csv")[-1]
print(f"replay of {rid} identical:", ex.format_row(again) == [stored[k] for k in ex.ROW_FIELDS])

for path in ex.write_report(rows, out / "report"):
    print("wrote", path)
for b in ex.read_rows(out / "report" / "min_cost.csv"):
    print(f"  alpha {b['alpha']} {b['mode']:<13} best cost {float(b['cost_per_period']):.1f}")
