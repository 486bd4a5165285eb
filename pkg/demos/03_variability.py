"""Forecast noise: how MRP and clearing-function planning degrade.

One forecast update of growing size (alpha) hits the PS1 system at 80 %
load.  MRP uses a one- and two-period lead time; the release model uses a
high clearing function and releases no later than the period before the due
date.  Common random numbers make the columns comparable row by row.
"""

from __future__ import annotations

from cfmrp import experiment as ex

plan = ex.ExperimentPlan(
    system="ps1", demand=((0.0, 0.0), (0.5, 0.0), (1.0, 0.0)), utilization=(0.8,),
    mode=("mrp-backward", "cf-optimized"), plt=(1, 2), cf=("high",), window=("d-1",),
    replications=2, run_length=120, warmup=30, node_limit=1)

rows = list(ex.run_grid(plan))
for s in ex.aggregate(rows):
    label = f"PLT {s['plt']}" if s["mode"] == "mrp-backward" else f"CF {s['cf']}"
    print(f"alpha {float(s['alpha']):4.2f}  {s['mode']:<13} {label:<8} "
          f"cost {s['cost_per_period']:8.1f}  tardiness {s['cost_tardiness']:7.1f}  "
          f"service {s['service_level']:.3f}  LT {s['aplt_mean']:.2f}")
