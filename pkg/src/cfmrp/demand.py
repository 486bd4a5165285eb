"""End-item demand under the additive martingale model of forecast evolution.

Every due date starts with the long-term forecast ``x_g``.  Exactly ``H``
periods before the due date the forecast receives one normal shock with
standard deviation ``alpha * x_g``; if ``beta > 0`` a second shock with
standard deviation ``beta * x_g`` arrives one period before the due date.
Forecasts are floored at zero, and the value held when the due date arrives
is the realized order amount.

Each shock is drawn from its own stream keyed by ``(seed, item, due, k)``, so
the demand trace does not depend on the order in which shocks are applied or
on anything else the simulation draws.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

ALPHA_STREAM, BETA_STREAM = 0, 1


@dataclass(frozen=True)
class DemandModelParams:
    long_term_forecast: Mapping[int, float]
    horizon: int = 10
    alpha: float = 0.0
    beta: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "long_term_forecast",
                           {int(g): float(x) for g, x in self.long_term_forecast.items()})
        if self.horizon < 1:
            raise ValueError("forecast horizon must be at least 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        for g, x in self.long_term_forecast.items():
            if not x > 0:
                raise ValueError(f"long-term forecast of item {g} must be positive")


def apply_update(previous: float, eps: float) -> float:
    """Add a forecast shock, truncating so the forecast stays nonnegative."""
    return max(0.0, previous + eps)


def draw_shock(seed: int, item: int, due: int, stream: int, sigma: float) -> float:
    if sigma == 0:
        return 0.0
    rng = np.random.default_rng([seed, item, due, stream])
    return float(rng.normal(0.0, sigma))


@dataclass
class ForecastSet:
    params: DemandModelParams
    n_due: int
    items: list[int]
    values: np.ndarray          # (items, due dates)
    now: int = -1
    replay: dict[tuple[int, int, int], float] | None = None
    trace: dict[tuple[int, int, int], float] = field(default_factory=dict)
    _alpha_done: np.ndarray = field(init=False, repr=False)
    _beta_done: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._row = {g: i for i, g in enumerate(self.items)}
        self._alpha_done = np.zeros(self.values.shape, dtype=bool)
        self._beta_done = np.zeros(self.values.shape, dtype=bool)

    def forecast(self, g: int, d: int) -> float:
        """Current forecast of item ``g`` for due period ``d``."""
        if d >= self.n_due or d < 0:
            return self.params.long_term_forecast[g] if d >= self.n_due else 0.0
        return float(self.values[self._row[g], d])

    def window(self, g: int, start: int, length: int) -> list[float]:
        """Forecasts for due periods ``start .. start + length - 1``.

        Due dates beyond the generated range count as zero demand.
        """
        row = self.values[self._row[g]]
        lo, hi = max(start, 0), min(start + length, self.n_due)
        out = [0.0] * length
        if hi > lo:
            out[lo - start:hi - start] = row[lo:hi].tolist()
        return out

    def is_realized(self, d: int) -> bool:
        return d <= self.now

    def _shock(self, g: int, d: int, gamma: int, stream: int, scale: float) -> None:
        i = self._row[g]
        key = (g, d, gamma)
        if self.replay is not None and key in self.replay:
            value = self.replay[key]
        else:
            sigma = scale * self.params.long_term_forecast[g]
            value = apply_update(float(self.values[i, d]),
                                 draw_shock(self.params.rng_seed, g, d, stream, sigma))
        self.values[i, d] = value
        self.trace[key] = value


def init_forecasts(params: DemandModelParams, horizon_length: int) -> ForecastSet:
    """Forecast set for due periods ``0 .. horizon_length - 1``, all at ``x_g``."""
    if horizon_length < 0:
        raise ValueError("horizon_length must be nonnegative")
    items = sorted(params.long_term_forecast)
    values = np.empty((len(items), horizon_length))
    for i, g in enumerate(items):
        values[i, :] = params.long_term_forecast[g]
    return ForecastSet(params, horizon_length, items, values)


def advance_one_period(fs: ForecastSet, params: DemandModelParams | None = None) -> ForecastSet:
    """Move the clock one period forward and apply the due forecast updates.

    Due dates that already sit inside the update windows when the clock
    starts receive their pending shocks on the first call.
    """
    params = params or fs.params
    fs.now += 1
    now, H = fs.now, params.horizon
    for g in fs.items:
        i = fs._row[g]
        for d in range(max(now, 0), min(now + H, fs.n_due - 1) + 1):
            if not fs._alpha_done[i, d]:
                fs._shock(g, d, H, ALPHA_STREAM, params.alpha)
                fs._alpha_done[i, d] = True
        if params.beta > 0:
            for d in range(max(now, 0), min(now + 1, fs.n_due - 1) + 1):
                if not fs._beta_done[i, d]:
                    fs._shock(g, d, 1, BETA_STREAM, params.beta)
                    fs._beta_done[i, d] = True
        if 0 <= now < fs.n_due:
            fs.trace[(g, now, 0)] = float(fs.values[i, now])
    return fs


def realized_demand(fs: ForecastSet, g: int, d: int) -> float:
    if not fs.is_realized(d):
        raise ValueError(f"demand of item {g} due {d} is not realized yet (now={fs.now})")
    if d >= fs.n_due:
        raise ValueError(f"due period {d} lies outside the generated range")
    return float(fs.values[fs._row[g], d])


def export_trace(fs: ForecastSet, path: str | Path) -> None:
    """Write every applied update as ``item,due,gamma,value`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "due", "gamma", "value"])
        for (g, d, gamma), value in sorted(fs.trace.items()):
            writer.writerow([g, d, gamma, repr(value)])


def import_trace(path: str | Path) -> dict[tuple[int, int, int], float]:
    with open(path, newline="") as fh:
        return {(int(r["item"]), int(r["due"]), int(r["gamma"])): float(r["value"])
                for r in csv.DictReader(fh)}


def snapshot(fs: ForecastSet) -> tuple:
    """State needed to undo later :func:`advance_one_period` calls."""
    return fs.now, fs.values.copy(), fs._alpha_done.copy(), fs._beta_done.copy(), len(fs.trace)


def restore(fs: ForecastSet, snap: tuple) -> None:
    now, values, alpha_done, beta_done, n_trace = snap
    fs.now = now
    fs.values[...] = values
    fs._alpha_done[...] = alpha_done
    fs._beta_done[...] = beta_done
    while len(fs.trace) > n_trace:
        fs.trace.popitem()
