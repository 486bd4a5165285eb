"""Piecewise-linear concave clearing functions.

A clearing function bounds the processed load of a resource in a period by
``min_c(slope_c * load + intercept_c)``.  All loads are in minutes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Named three-segment variants: fraction of capacity where the middle
# segment leaves the diagonal.
THREE_SEGMENT_LEVELS = {"high": 0.8, "medium": 0.6, "low": 0.4}


@dataclass(frozen=True)
class ClearingFunction:
    segments: tuple[tuple[float, float], ...]
    capacity: float
    name: str = "custom"

    def __post_init__(self) -> None:
        segs = tuple((float(a), float(b)) for a, b in self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) < 2:
            raise ValueError("a clearing function needs at least two segments")
        if segs[0] != (1.0, 0.0):
            raise ValueError("first segment must be (1, 0): output cannot exceed load")
        if segs[-1] != (0.0, float(self.capacity)):
            raise ValueError("last segment must be (0, capacity)")
        for (a0, b0), (a1, b1) in zip(segs, segs[1:]):
            if not (a1 < a0 and b1 > b0):
                raise ValueError("slopes must strictly decrease and intercepts strictly increase")

    def __call__(self, load):
        return max_output(self, load)

    @property
    def slopes(self) -> np.ndarray:
        return np.array([a for a, _ in self.segments])

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([b for _, b in self.segments])

    def breakpoints(self) -> list[float]:
        """Loads where consecutive segments intersect."""
        return [(b1 - b0) / (a0 - a1)
                for (a0, b0), (a1, b1) in zip(self.segments, self.segments[1:])]


def make_ideal(mc: float) -> ClearingFunction:
    if mc <= 0:
        raise ValueError("capacity must be positive")
    return ClearingFunction(((1.0, 0.0), (0.0, mc)), mc, name="ideal")


def make_three_segment(mc: float, fraction: float, name: str | None = None) -> ClearingFunction:
    """Diagonal, a slope-1/2 segment meeting it at ``fraction * mc``, and the plateau.

    The middle segment reaches the plateau at load ``(2 - fraction) * mc``.
    """
    if mc <= 0:
        raise ValueError("capacity must be positive")
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    return ClearingFunction(((1.0, 0.0), (0.5, fraction * mc / 2), (0.0, mc)), mc,
                            name=name or f"three-{fraction:g}")


def max_output(cf: ClearingFunction, load):
    """Largest processed load the function allows for ``load`` (scalar or array)."""
    arr = np.asarray(load, dtype=float)
    if np.any(arr < 0):
        raise ValueError("load must be nonnegative")
    out = np.min(cf.slopes[:, None] * arr.reshape(1, -1) + cf.intercepts[:, None], axis=0)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def make_cf(kind: str | Sequence[Sequence[float]], mc: float) -> ClearingFunction:
    """Build a clearing function from a config value.

    ``kind`` is ``"ideal"``, one of ``"high"``/``"medium"``/``"low"``,
    ``"three:<fraction>"`` or an explicit list of ``(slope, intercept)`` pairs.
    """
    if not isinstance(kind, str):
        return ClearingFunction(tuple(tuple(s) for s in kind), mc)
    key = kind.strip().lower()
    if key == "ideal":
        return make_ideal(mc)
    if key in THREE_SEGMENT_LEVELS:
        return make_three_segment(mc, THREE_SEGMENT_LEVELS[key], name=key)
    if key.startswith("three:"):
        return make_three_segment(mc, float(key.split(":", 1)[1]))
    raise ValueError(f"unknown clearing function {kind!r}")
