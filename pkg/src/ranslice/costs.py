"""Convex piecewise-linear utilization cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PiecewiseCost:
    """cost(u) = max(0, max_i a_i*u - b_i) over ``segments`` = ((a_1, b_1), ...)."""

    segments: tuple[tuple[float, float], ...]
    u_max: float = 1.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("piecewise cost needs at least one segment")
        slopes = [a for a, _ in self.segments]
        if slopes != sorted(slopes) or slopes[0] < 0:
            raise ValueError("segment slopes must be non-negative and ascending")
        if abs(self(0.0)) > 1e-12:
            raise ValueError("cost(0) must be 0")

    @classmethod
    def from_breakpoints(cls, slopes, breakpoints, u_max: float = 1.0) -> "PiecewiseCost":
        """Continuous cost through the origin with slope ``slopes[i]`` after ``breakpoints[i-1]``."""
        if len(breakpoints) != len(slopes) - 1:
            raise ValueError("need len(slopes) - 1 breakpoints")
        segs = [(float(slopes[0]), 0.0)]
        for a, u in zip(slopes[1:], breakpoints):
            a0, b0 = segs[-1]
            value = a0 * u - b0
            segs.append((float(a), a * u - value))
        return cls(tuple(segs), u_max)

    def __call__(self, u: float) -> float:
        return max(0.0, max(a * u - b for a, b in self.segments))

    def vectorized(self, u: np.ndarray) -> np.ndarray:
        a = np.array([s[0] for s in self.segments])
        b = np.array([s[1] for s in self.segments])
        return np.maximum((u[..., None] * a - b).max(axis=-1), 0.0)


DEFAULT_PIECEWISE = PiecewiseCost.from_breakpoints((1, 3, 10, 70), (1 / 3, 2 / 3, 0.9))


def piecewise_cost_eval(pw: PiecewiseCost, u: float) -> float:
    if not (0.0 <= u <= pw.u_max):
        raise ValueError(f"utilization {u} outside [0, {pw.u_max}]")
    return pw(u)
