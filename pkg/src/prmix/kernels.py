"""Mixture kernels ``k(x | u)`` and mixture-density evaluation.

Every kernel knows how to integrate itself against the hat functions of a
grid (``grid_weights``). The predictive recursion update and the mixture
density both go through these weights, so the two always agree and the
update conserves mass exactly.
"""
from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np
from scipy.stats import norm

from .exceptions import ConfigurationError, InvalidParameterError
from .measure import trapezoid_weights

_EMPTY = np.empty(0)


class Kernel:
    """Conditional density ``k(x | u)`` of an observation given a mixing parameter."""

    name = "kernel"

    def evaluate(self, x, u):
        raise NotImplementedError

    def observation_support(self, u):
        raise NotImplementedError

    @property
    def descriptor(self):
        return {"name": self.name}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.descriptor.items() if k != "name")
        return f"{type(self).__name__}({params})"

    def __eq__(self, other):
        return type(self) is type(other) and self.descriptor == other.descriptor

    def __hash__(self):
        return hash(tuple(sorted(self.descriptor.items())))

    def grid_weights(self, x, grid):
        """Integrals of ``k(x | .)`` against each hat function of ``grid``.

        The default is the trapezoid rule, ``c_j * k(x | u_j)``, which is
        adequate for kernels that are smooth in ``u``.
        """
        grid = np.asarray(grid, dtype=float)
        return trapezoid_weights(grid) * self.evaluate(x, grid)

    def column_provider(self, grid):
        """Return ``x -> (start, head, tail, tail_over_c)`` describing ``grid_weights(x, grid)``.

        Weights are zero before node ``start``; ``head`` holds the next few
        weights explicitly and ``tail`` the rest, with ``tail_over_c`` the
        tail divided by the trapezoid weights. Kernels whose weights share
        structure across ``x`` override this to skip work.
        """
        grid = np.asarray(grid, dtype=float)
        c = trapezoid_weights(grid)

        def columns(x):
            w = self.grid_weights(x, grid)
            return 0, _EMPTY, w, w / c

        return columns

    def endpoint_values(self, x, lower, upper):
        """``(k(x | lower), k(x | upper))`` as floats."""
        return float(self.evaluate(x, lower)), float(self.evaluate(x, upper))

    def observation_integrals(self, x_grid, values, u):
        """Trapezoid integrals of ``values(x) * k(x | u)`` over ``x_grid``, one per ``u``."""
        x_grid = np.asarray(x_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        cx = trapezoid_weights(x_grid) * values
        out = np.empty(u.shape)
        for i0 in range(0, u.size, 256):
            block = u[i0:i0 + 256]
            out[i0:i0 + 256] = self.evaluate(x_grid[None, :], block[:, None]) @ cx
        return out

    def mixture_values(self, xs, measure):
        xs = np.asarray(xs, dtype=float)
        s = measure.support
        cp = trapezoid_weights(measure.grid) * measure.density
        out = np.empty(xs.shape)
        flat = out.reshape(-1)
        for i, x in enumerate(xs.reshape(-1)):
            flat[i] = (
                measure.atom_lower * self.evaluate(x, s.lower)
                + measure.atom_upper * self.evaluate(x, s.upper)
                + np.dot(cp, self.evaluate(x, measure.grid))
            )
        return out


class UniformKernel(Kernel):
    """Scale kernel ``Unif(x | 0, u) = 1/u`` on the closed interval ``[0, u]``."""

    name = "uniform"

    def evaluate(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise InvalidParameterError("uniform kernel needs u > 0")
        out = np.where((x >= 0) & (x <= u), 1.0 / u, 0.0)
        return out if out.ndim else float(out)

    def observation_support(self, u):
        if u <= 0:
            raise InvalidParameterError("uniform kernel needs u > 0")
        return (0.0, float(u))

    def endpoint_values(self, x, lower, upper):
        if lower <= 0:
            raise InvalidParameterError("uniform kernel needs u > 0")
        return (1.0 / lower if 0 <= x <= lower else 0.0), (1.0 / upper if 0 <= x <= upper else 0.0)

    def grid_weights(self, x, grid):
        # exact: integral of hat_j(u)/u over u >= max(x, grid[0])
        grid = np.asarray(grid, dtype=float)
        w = np.zeros_like(grid)
        if x < 0 or x >= grid[-1]:
            return w
        s = max(float(x), grid[0])
        k = min(int(np.searchsorted(grid, s, side="right")) - 1, grid.size - 2)
        a, b = grid[k:-1], grid[k + 1:]
        lo = a.copy()
        lo[0] = s
        left, right = _cell_parts(a, b, lo)
        w[k:-1] += left
        w[k + 1:] += right
        return w

    def column_provider(self, grid):
        # whole cells above x contribute fixed weights; only the cell holding x changes
        grid = np.asarray(grid, dtype=float)
        c = trapezoid_weights(grid)
        a, b = grid[:-1], grid[1:]
        full_l, full_r = _cell_parts(a, b, a)
        node = np.zeros_like(grid)
        node[:-1] += full_l
        node[1:] += full_r
        node_c = node / c
        last = grid.size - 2
        nodes = grid.tolist()
        next_left = full_l.tolist() + [0.0]

        def columns(x):
            if x < 0 or x >= nodes[-1]:
                return grid.size, _EMPTY, _EMPTY, _EMPTY
            if x <= nodes[0]:
                return 0, _EMPTY, node, node_c
            k = min(bisect_right(nodes, x) - 1, last)
            pl, pr = _cell_parts_scalar(nodes[k], nodes[k + 1], x)
            head = np.array([pl, pr + next_left[k + 1]])
            return k, head, node[k + 2:], node_c[k + 2:]

        return columns

    def observation_integrals(self, x_grid, values, u):
        # (1/u) * integral of values over [0, u], by cumulative trapezoid
        x_grid = np.asarray(x_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u <= 0):
            raise InvalidParameterError("uniform kernel needs u > 0")
        keep = x_grid >= 0
        xg, v = x_grid[keep], values[keep]
        cum = np.concatenate([[0.0], np.cumsum(np.diff(xg) * (v[:-1] + v[1:]) / 2)])
        return np.interp(u, xg, cum, left=0.0, right=cum[-1]) / u

    def mixture_values(self, xs, measure):
        xs = np.asarray(xs, dtype=float)
        s = measure.support
        g, p = measure.grid, measure.density
        a, b = g[:-1], g[1:]
        full_l, full_r = _cell_parts(a, b, a)
        cell = p[:-1] * full_l + p[1:] * full_r
        suffix = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])

        x = xs.reshape(-1)
        start = np.maximum(x, g[0])
        k = np.clip(np.searchsorted(g, start, side="right") - 1, 0, g.size - 2)
        inside = (x >= 0) & (start < g[-1])
        kb = g[k + 1]
        ps_l, ps_r = _cell_parts(g[k], kb, np.minimum(start, kb))
        interior = np.where(inside, p[k] * ps_l + p[k + 1] * ps_r + suffix[k + 1], 0.0)
        out = (
            interior
            + np.where((x >= 0) & (x <= s.lower), measure.atom_lower / s.lower, 0.0)
            + np.where((x >= 0) & (x <= s.upper), measure.atom_upper / s.upper, 0.0)
        )
        return out.reshape(xs.shape)


def _cell_parts(a, b, lo):
    """Integrals over ``[lo, b]`` of ``(b-u)/((b-a) u)`` and ``(u-a)/((b-a) u)``.

    Returned as coefficients on the values at the cell ends when the
    integrand is a linear function divided by ``u``; evaluated against the
    sub-cell ``[lo, b]`` with ``lo`` taking the role of the left end.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    span = b - lo
    safe = np.where(span > 0, span, 1.0)
    log_ratio = np.log1p(span / lo)
    # linear interpolant from value at lo to value at b: weights on (f(lo), f(b))
    left = np.where(span > 0, b * log_ratio / safe - 1.0, 0.0)
    right = np.where(span > 0, 1.0 - lo * log_ratio / safe, 0.0)
    # rewrite in terms of the cell-end hat functions when lo > a
    h = b - a
    t = (lo - a) / np.where(h > 0, h, 1.0)
    # f(lo) = (1-t) f(a) + t f(b) for the hat basis
    return left * (1.0 - t), right + left * t


def _cell_parts_scalar(a, b, lo):
    """Scalar version of :func:`_cell_parts`."""
    span = b - lo
    if span <= 0:
        return 0.0, 0.0
    log_ratio = math.log1p(span / lo)
    left = b * log_ratio / span - 1.0
    right = 1.0 - lo * log_ratio / span
    t = (lo - a) / (b - a)
    return left * (1.0 - t), right + left * t


class GaussianKernel(Kernel):
    """Location kernel ``N(x | u, sigma^2)``."""

    name = "gaussian"

    def __init__(self, sigma=1.0):
        sigma = float(sigma)
        if not (sigma > 0 and math.isfinite(sigma)):
            raise InvalidParameterError(f"sigma must be positive, got {sigma}")
        self.sigma = sigma

    @property
    def descriptor(self):
        return {"name": self.name, "sigma": self.sigma}

    def evaluate(self, x, u):
        out = norm.pdf(np.asarray(x, dtype=float), loc=np.asarray(u, dtype=float), scale=self.sigma)
        return out if np.ndim(out) else float(out)

    def observation_support(self, u):
        return (-math.inf, math.inf)

    def mixture_values(self, xs, measure):
        xs = np.asarray(xs, dtype=float)
        s = measure.support
        cp = trapezoid_weights(measure.grid) * measure.density
        x = xs.reshape(-1, 1)
        out = (
            norm.pdf(x, loc=measure.grid, scale=self.sigma) @ cp
            + measure.atom_lower * norm.pdf(x[:, 0], loc=s.lower, scale=self.sigma)
            + measure.atom_upper * norm.pdf(x[:, 0], loc=s.upper, scale=self.sigma)
        )
        return out.reshape(xs.shape)


def uniform_kernel():
    return UniformKernel()


def gaussian_kernel(sigma):
    return GaussianKernel(sigma)


def kernel_from_name(name, sigma=None):
    """Build a kernel from its CLI/config name: ``"uniform"`` or ``"gaussian"``."""
    if name == "uniform":
        return UniformKernel()
    if name == "gaussian":
        return GaussianKernel(1.0 if sigma is None else sigma)
    raise ConfigurationError(f"unknown kernel {name!r}; expected 'uniform' or 'gaussian'")


def mixture_density(kernel, P, x):
    """Mixture density ``m_P(x) = integral of k(x | u) P(du)``.

    Scalar in, float out; arrays are evaluated element-wise.
    """
    values = kernel.mixture_values(np.asarray(x, dtype=float), P)
    return float(values) if np.ndim(x) == 0 else values
