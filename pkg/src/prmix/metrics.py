"""Divergences between densities on a fixed trapezoid grid."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, EvaluationError
from .measure import trapezoid_weights

DEFAULT_RESOLUTION = 10_000
_F_POSITIVE = 1e-12
_G_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class DensityPair:
    """Two densities compared over ``integration_range``.

    ``breakpoints`` are extra nodes merged into the uniform grid, typically
    both sides of a known jump so the trapezoid rule does not straddle it.
    """

    f: object
    g: object
    integration_range: tuple
    resolution: int = DEFAULT_RESOLUTION
    breakpoints: tuple = ()

    def nodes(self):
        return integration_nodes(self.integration_range, self.resolution, self.breakpoints)

    def evaluate(self):
        x = self.nodes()
        fx = _density_values(self.f, x, "f")
        gx = _density_values(self.g, x, "g")
        return x, fx, gx


def integration_nodes(integration_range, resolution=DEFAULT_RESOLUTION, breakpoints=()):
    lo, hi = map(float, integration_range)
    x = np.linspace(lo, hi, int(resolution))
    if len(breakpoints):
        bp = np.asarray(breakpoints, dtype=float)
        x = np.union1d(x, bp[(bp >= lo) & (bp <= hi)])
    return x


def jump_nodes(*points):
    """Nodes straddling each jump: the point itself and the next float above it.

    A density that is right-discontinuous at ``p`` (such as a uniform
    component closed at ``p``) is then integrated without a straddling cell.
    """
    out = []
    for p in points:
        p = float(p)
        out.extend((p, float(np.nextafter(p, np.inf))))
    return tuple(out)


def _density_values(fn, x, label):
    v = np.asarray(fn(x), dtype=float) * np.ones_like(x)
    if np.any(np.isnan(v)):
        raise EvaluationError(f"density {label} returned NaN")
    if np.any(v < 0):
        raise DomainError(f"density {label} is negative at x={x[np.argmax(v < 0)]!r}")
    return v


def kl_divergence(pair):
    """``integral f log(f/g)``; ``inf`` when ``g`` vanishes where ``f`` has mass."""
    x, f, g = pair.evaluate()
    if np.any((f > _F_POSITIVE) & (g < _G_UNDERFLOW)):
        return math.inf
    pos = f > 0
    integrand = np.zeros_like(f)
    integrand[pos] = f[pos] * np.log(f[pos] / np.maximum(g[pos], _G_UNDERFLOW))
    return float(np.dot(trapezoid_weights(x), integrand))


def l1_distance(pair):
    x, f, g = pair.evaluate()
    return float(np.dot(trapezoid_weights(x), np.abs(f - g)))


def hellinger_distance(pair):
    """Plain Hellinger distance ``sqrt(integral (sqrt f - sqrt g)^2)``."""
    x, f, g = pair.evaluate()
    return math.sqrt(float(np.dot(trapezoid_weights(x), (np.sqrt(f) - np.sqrt(g)) ** 2)))


def hellinger_contrast(f, g, m_star, m_dagger, integration_range, resolution=DEFAULT_RESOLUTION, breakpoints=()):
    """Hellinger distance between ``f`` and ``g`` weighted by ``m_star / m_dagger``.

    Equal to the plain Hellinger distance when ``m_star == m_dagger``.
    """
    x = integration_nodes(integration_range, resolution, breakpoints)
    fx = _density_values(f, x, "f")
    gx = _density_values(g, x, "g")
    ms = _density_values(m_star, x, "m_star")
    md = _density_values(m_dagger, x, "m_dagger")
    bad = (ms > _F_POSITIVE) & (md < _G_UNDERFLOW)
    if bad.any():
        raise EvaluationError(f"m_dagger underflows at x={x[np.argmax(bad)]!r} where m_star > 0")
    weight = np.zeros_like(ms)
    pos = ms > 0
    weight[pos] = ms[pos] / md[pos]
    rho2 = float(np.dot(trapezoid_weights(x), (np.sqrt(fx) - np.sqrt(gx)) ** 2 * weight))
    return math.sqrt(max(rho2, 0.0))
