"""Hybrid mixing measures on a compact interval.

A :class:`MixingMeasure` carries two point masses, one at each end of the
support ``[lower, upper]``, plus a non-negative density with respect to
Lebesgue measure stored at the nodes of an equally spaced grid. Between
nodes the density is linear, so trapezoid quadrature integrates it exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigurationError,
    DegenerateMeasureError,
    EvaluationError,
    IncompatibleMeasureError,
)

MASS_TOL = 1e-10


@dataclass(frozen=True)
class SupportInterval:
    """Compact support ``[lower, upper]`` with ``0 < lower < upper < inf``."""

    lower: float
    upper: float

    def __post_init__(self):
        lower, upper = float(self.lower), float(self.upper)
        if not (np.isfinite(lower) and np.isfinite(upper)):
            raise ConfigurationError(f"support bounds must be finite, got [{lower}, {upper}]")
        if not 0 < lower < upper:
            raise ConfigurationError(f"support must satisfy 0 < lower < upper, got [{lower}, {upper}]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def width(self):
        return self.upper - self.lower

    def grid(self, size):
        """Equally spaced nodes covering the support, endpoints included."""
        if int(size) < 2:
            raise ConfigurationError(f"grid size must be at least 2, got {size}")
        return np.linspace(self.lower, self.upper, int(size))


def trapezoid_weights(grid):
    """Per-node trapezoid weights ``c_j`` so that ``sum(c * f) ~ integral of f``."""
    grid = np.asarray(grid, dtype=float)
    h = np.diff(grid)
    c = np.zeros_like(grid)
    c[:-1] += h / 2
    c[1:] += h / 2
    return c


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MixingMeasure:
    """Endpoint atoms plus a gridded interior density.

    Parameters
    ----------
    support : SupportInterval
    atom_lower, atom_upper : float
        Point masses at ``support.lower`` and ``support.upper``.
    grid : array of shape (G,)
        Strictly increasing nodes inside ``[lower, upper]``.
    density : array of shape (G,)
        Non-negative Lebesgue density at each node.

    Construction does not require unit mass; :func:`normalize` does that.
    """

    support: SupportInterval
    atom_lower: float
    atom_upper: float
    grid: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = _frozen(self.grid)
        density = _frozen(self.density)
        if grid.ndim != 1 or grid.shape != density.shape:
            raise ConfigurationError("grid and density must be 1-d arrays of equal length")
        if grid.size < 2:
            raise ConfigurationError("grid needs at least two nodes")
        if np.any(np.diff(grid) <= 0):
            raise ConfigurationError("grid must be strictly increasing")
        s = self.support
        if grid[0] < s.lower or grid[-1] > s.upper:
            raise ConfigurationError("grid must lie inside the support interval")
        a_lo, a_hi = float(self.atom_lower), float(self.atom_upper)
        values = np.concatenate([[a_lo, a_hi], density])
        if not np.all(np.isfinite(values)):
            raise EvaluationError("measure components must be finite")
        if a_lo < 0 or a_hi < 0 or np.any(density < 0):
            raise ConfigurationError("measure components must be non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)
        object.__setattr__(self, "atom_lower", a_lo)
        object.__setattr__(self, "atom_upper", a_hi)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_density(cls, support, density_fn, grid_size=1000, atom_lower=0.0, atom_upper=0.0):
        """Tabulate ``density_fn`` on an equally spaced grid over ``support``."""
        grid = support.grid(grid_size)
        dens = np.asarray(density_fn(grid), dtype=float) * np.ones_like(grid)
        return cls(support, atom_lower, atom_upper, grid, dens)

    @classmethod
    def uniform(cls, support, grid_size=1000):
        return cls.from_density(support, lambda u: np.full_like(u, 1.0 / support.width), grid_size)

    @classmethod
    def point_mass(cls, support, location, grid_size=1000):
        """Unit mass at ``location``.

        Endpoints become genuine atoms. An interior location becomes a hat
        function of unit mass on the nearest node, the narrowest point mass
        the grid can represent.
        """
        grid = support.grid(grid_size)
        dens = np.zeros_like(grid)
        if location == support.lower:
            return cls(support, 1.0, 0.0, grid, dens)
        if location == support.upper:
            return cls(support, 0.0, 1.0, grid, dens)
        if not support.lower < location < support.upper:
            raise ConfigurationError(f"location {location} outside support")
        j = int(np.argmin(np.abs(grid - location)))
        dens[j] = 1.0 / trapezoid_weights(grid)[j]
        return cls(support, 0.0, 0.0, grid, dens)

    # -- derived quantities ----------------------------------------------
    @property
    def weights(self):
        return trapezoid_weights(self.grid)

    @property
    def interior_mass(self):
        return float(np.dot(self.weights, self.density))

    @property
    def total_mass(self):
        return self.atom_lower + self.atom_upper + self.interior_mass

    def cdf(self):
        """Distribution function evaluated at every grid node."""
        g, p = self.grid, self.density
        cum = np.concatenate([[0.0], np.cumsum(np.diff(g) * (p[:-1] + p[1:]) / 2)])
        out = self.atom_lower + cum
        if g[-1] >= self.support.upper:
            out[-1] += self.atom_upper
        return out

    def check_mass(self, tol=MASS_TOL):
        err = abs(self.total_mass - 1.0)
        if err > tol:
            raise DegenerateMeasureError(f"total mass deviates from 1 by {err:.3e}")
        return self

    def replace(self, atom_lower=None, atom_upper=None, density=None):
        return MixingMeasure(
            self.support,
            self.atom_lower if atom_lower is None else atom_lower,
            self.atom_upper if atom_upper is None else atom_upper,
            self.grid,
            self.density if density is None else density,
        )

    def scaled(self, factor):
        return self.replace(self.atom_lower * factor, self.atom_upper * factor, self.density * factor)

    # -- serialization -----------------------------------------------------
    def to_dict(self):
        return {
            "lower": self.support.lower,
            "upper": self.support.upper,
            "atom_lower": self.atom_lower,
            "atom_upper": self.atom_upper,
            "grid": [float(v) for v in self.grid],
            "density": [float(v) for v in self.density],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        return cls(
            SupportInterval(d["lower"], d["upper"]),
            d["atom_lower"],
            d["atom_upper"],
            np.asarray(d["grid"], dtype=float),
            np.asarray(d["density"], dtype=float),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _same_layout(a, b):
    return a.support == b.support and a.grid.shape == b.grid.shape and np.array_equal(a.grid, b.grid)


def quadrature(measure, integrand):
    """Integral of ``integrand`` against ``measure``.

    Atoms contribute ``mass * f(endpoint)``; the interior uses the trapezoid
    rule on ``f * density`` over the grid. ``integrand`` must accept arrays.
    """
    s = measure.support
    u = np.concatenate([[s.lower, s.upper], measure.grid])
    with np.errstate(all="ignore"):
        f = np.asarray(integrand(u), dtype=float) * np.ones_like(u)
    bad = ~np.isfinite(f)
    if bad.any():
        raise EvaluationError(f"integrand is not finite at u={u[np.argmax(bad)]!r}")
    return float(
        measure.atom_lower * f[0] + measure.atom_upper * f[1] + np.dot(measure.weights, f[2:] * measure.density)
    )


def normalize(measure):
    """Rescale all components so that the total mass is one."""
    total = measure.total_mass
    if not np.isfinite(total) or total <= 0:
        raise DegenerateMeasureError(f"cannot normalize a measure with total mass {total!r}")
    return measure.scaled(1.0 / total)


def weak_distance(a, b):
    """Kolmogorov distance between the distribution functions of ``a`` and ``b`` on the grid."""
    if not _same_layout(a, b):
        raise IncompatibleMeasureError("measures must share support and grid")
    return float(np.max(np.abs(a.cdf() - b.cdf())))


def average(measures):
    """Component-wise mean, summed in the given order."""
    measures = list(measures)
    if not measures:
        raise ConfigurationError("cannot average an empty collection of measures")
    first = measures[0]
    lo = hi = 0.0
    dens = np.zeros_like(first.density)
    for m in measures:
        if not _same_layout(first, m):
            raise IncompatibleMeasureError("measures must share support and grid")
        lo += m.atom_lower
        hi += m.atom_upper
        dens = dens + m.density
    k = len(measures)
    return first.replace(lo / k, hi / k, dens / k)
