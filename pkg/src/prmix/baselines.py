"""Grenander estimator: the nonparametric MLE of a non-increasing density."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DomainError, EmptyDataError


@dataclass(frozen=True, eq=False)
class StepDensity:
    """Left-continuous step function on ``[0, breakpoints[-1]]``.

    ``heights[i]`` applies on ``(breakpoints[i], breakpoints[i + 1]]``; the
    first height also applies at ``x = 0``.
    """

    breakpoints: np.ndarray = field(repr=False)
    heights: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float)
        h = np.array(self.heights, dtype=float)
        if b.ndim != 1 or h.ndim != 1 or b.size != h.size + 1 or h.size == 0:
            raise ConfigurationError("need len(breakpoints) == len(heights) + 1 >= 2")
        if np.any(np.diff(b) <= 0):
            raise ConfigurationError("breakpoints must be strictly increasing")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise ConfigurationError("heights must be finite and non-negative")
        b.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "heights", h)

    @property
    def widths(self):
        return np.diff(self.breakpoints)

    @property
    def total_mass(self):
        return float(np.dot(self.heights, self.widths))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.heights * self.widths)])
        return np.interp(x, self.breakpoints, cum, left=0.0, right=cum[-1])

    def __call__(self, x):
        return step_density_at(self, x)

    def to_dict(self):
        return {"breakpoints": [float(v) for v in self.breakpoints], "heights": [float(v) for v in self.heights]}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["breakpoints"], dtype=float), np.asarray(d["heights"], dtype=float))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def grenander(data):
    """Left derivative of the least concave majorant of the empirical CDF.

    Built from the upper convex hull of the ECDF vertices ``(0, 0)`` and
    ``(x_(k), F_n(x_(k)))`` with ties merged into single jumps.

    Raises
    ------
    EmptyDataError
        No observations.
    DomainError
        Negative, zero or non-finite observations. An observation at zero
        would put an atom at the origin, which no density can represent.
    """
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size == 0:
        raise EmptyDataError("Grenander estimator needs at least one observation")
    if not np.all(np.isfinite(x)):
        raise DomainError("observations must be finite")
    if np.any(x < 0):
        raise DomainError(f"observations must be non-negative, got {float(x.min())!r}")
    if np.any(x == 0):
        raise DomainError("observations at zero make the Grenander estimator unbounded")
    values, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts) / x.size
    cum[-1] = 1.0
    points = [(0.0, 0.0)] + list(zip(values.tolist(), cum.tolist()))
    hull = []
    for p in points:
        # upper hull: pop while the last turn is counter-clockwise or straight
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= 0:
            hull.pop()
        hull.append(p)
    hx = np.array([p[0] for p in hull])
    hy = np.array([p[1] for p in hull])
    heights = np.diff(hy) / np.diff(hx)
    return StepDensity(hx, heights)


def step_density_at(d, x):
    """Height of the step containing ``x``; zero outside ``[0, breakpoints[-1]]``."""
    xa = np.asarray(x, dtype=float)
    b = d.breakpoints
    idx = np.searchsorted(b, xa, side="left") - 1
    idx = np.where(xa == b[0], 0, idx)
    inside = (xa >= b[0]) & (xa <= b[-1])
    out = np.where(inside, d.heights[np.clip(idx, 0, d.heights.size - 1)], 0.0)
    return out if out.ndim else float(out)
