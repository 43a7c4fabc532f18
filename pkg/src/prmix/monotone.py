"""Monotone density estimation with scale mixtures of uniforms.

A non-increasing density ``m`` on ``[0, inf)`` is a mixture of
``Unif(0, u)`` kernels with mixing density ``p(u) = -u m'(u)``. Fitting the
mixture by predictive recursion needs a compact support ``[ell, L]``; this
module builds that support and the atom-bearing initial guess, and exposes
closed-form oracles for what the fit converges to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .engine import PrConfig, fit
from .exceptions import (
    ConfigurationError,
    DegenerateMeasureError,
    EmptyDataError,
    EvaluationError,
    NonMonotoneError,
)
from .kernels import UniformKernel, mixture_density
from .measure import MixingMeasure, SupportInterval, trapezoid_weights

DEFAULT_LOWER = 1e-5
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class MonotoneTruth:
    """Analytic monotone density with its distribution function and mixing density.

    ``mixing_cdf(t)`` gives ``P([0, t])`` in closed form when available;
    ``mixing_atoms`` lists ``(location, mass)`` pairs for discrete parts of
    the mixing distribution.
    """

    name: str
    density: object
    cdf: object
    mixing_density: object
    density_derivative: object = None
    mixing_cdf: object = None
    mixing_atoms: tuple = ()
    mode: float = field(default=None)

    def mixing_mass(self, a, b):
        """``P([a, b])`` for the mixing distribution."""
        if b <= a:
            return 0.0
        if self.mixing_cdf is not None:
            lower = self.mixing_cdf(a) if a > 0 else 0.0
            atoms_at_a = sum(m for loc, m in self.mixing_atoms if loc == a)
            return float(self.mixing_cdf(b) - lower + atoms_at_a)
        value, _ = integrate.quad(self.mixing_density, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        return float(value + sum(m for loc, m in self.mixing_atoms if a <= loc <= b))

    def validate(self, upper=10.0, points=1000, tol=1e-6):
        """Check monotonicity and ``p(u) = -u m'(u)`` on a grid; raise on failure."""
        x = np.linspace(0.0, upper, points)
        m = np.asarray(self.density(x), dtype=float)
        if np.any(np.diff(m) > 1e-12):
            raise NonMonotoneError(f"{self.name} density increases somewhere on [0, {upper}]")
        u = x[1:-1]
        h = 1e-6
        deriv = (np.asarray(self.density(u + h)) - np.asarray(self.density(u - h))) / (2 * h)
        mix = np.asarray(self.mixing_density(u), dtype=float)
        if np.any(mix < 0):
            raise EvaluationError(f"{self.name} mixing density is negative")
        smooth = np.ones(u.shape, dtype=bool)
        for loc, _ in self.mixing_atoms:
            smooth &= np.abs(u - loc) > 2 * h
        err = np.max(np.abs(-u * deriv - mix)[smooth]) if smooth.any() else 0.0
        if err > tol:
            raise EvaluationError(f"{self.name}: -u m'(u) differs from the mixing density by {err:.3e}")
        return self


def exponential_truth():
    return MonotoneTruth(
        name="exponential",
        density=lambda x: np.where(np.asarray(x) >= 0, np.exp(-np.maximum(x, 0.0)), 0.0),
        cdf=lambda x: np.where(np.asarray(x) >= 0, -np.expm1(-np.maximum(x, 0.0)), 0.0),
        mixing_density=lambda u: np.where(np.asarray(u) >= 0, np.maximum(u, 0.0) * np.exp(-np.maximum(u, 0.0)), 0.0),
        density_derivative=lambda x: -np.exp(-np.asarray(x, dtype=float)),
        # P([0, t]) = 1 - (1 + t) e^{-t}
        mixing_cdf=lambda t: float(-math.expm1(-t) - t * math.exp(-t)),
        mode=1.0,
    )


def halfnormal_truth():
    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, _SQRT_2_OVER_PI * np.exp(-0.5 * x * x), 0.0)

    def mixing_density(u):
        u = np.asarray(u, dtype=float)
        return np.where(u >= 0, _SQRT_2_OVER_PI * u * u * np.exp(-0.5 * u * u), 0.0)

    return MonotoneTruth(
        name="halfnormal",
        density=density,
        cdf=lambda x: np.where(np.asarray(x) >= 0, special.erf(np.maximum(x, 0.0) / math.sqrt(2.0)), 0.0),
        mixing_density=mixing_density,
        density_derivative=lambda x: -np.asarray(x, dtype=float) * _SQRT_2_OVER_PI * np.exp(-0.5 * np.square(x)),
        # P([0, t]) = M(t) - t m(t)
        mixing_cdf=lambda t: float(math.erf(t / math.sqrt(2.0)) - t * _SQRT_2_OVER_PI * math.exp(-0.5 * t * t)),
        mode=_SQRT_2_OVER_PI,
    )


def uniform_truth(c=1.0):
    """``Unif(0, c)``: a single uniform component, mixing distribution ``delta_c``."""
    c = float(c)
    if not c > 0:
        raise ConfigurationError("uniform truth needs c > 0")
    return MonotoneTruth(
        name=f"uniform({c:g})",
        density=lambda x: np.where((np.asarray(x) >= 0) & (np.asarray(x) <= c), 1.0 / c, 0.0),
        cdf=lambda x: np.clip(np.asarray(x, dtype=float) / c, 0.0, 1.0),
        mixing_density=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        density_derivative=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        mixing_cdf=lambda t: 1.0 if t >= c else 0.0,
        mixing_atoms=((c, 1.0),),
        mode=1.0 / c,
    )


TRUTHS = {"exponential": exponential_truth, "halfnormal": halfnormal_truth}


def get_truth(name):
    try:
        return TRUTHS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown truth {name!r}; expected one of {sorted(TRUTHS)}") from None


@dataclass(frozen=True)
class RestrictedTarget:
    """``m`` conditioned on ``X <= L``: ``m(x) 1[0, L](x) / M(L)``."""

    truth: MonotoneTruth
    L: float

    @property
    def normalizer(self):
        return float(self.truth.cdf(self.L))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= 0) & (x <= self.L), self.truth.density(x) / self.normalizer, 0.0)
        return out if out.ndim else float(out)

    __call__ = density


def restrict_target(truth, L):
    L = float(L)
    if not truth.cdf(L) > 0:
        raise DegenerateMeasureError(f"M({L}) = 0: the truth has no mass below L")
    return RestrictedTarget(truth, L)


def build_support(data, lower=DEFAULT_LOWER):
    """``[lower, max(data)]``."""
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.size == 0:
        raise ConfigurationError("cannot build a support from empty data")
    top = float(np.max(data))
    if not lower < top:
        raise ConfigurationError(f"lower bound {lower} must be below max(data) = {top}")
    return SupportInterval(lower, top)


def initial_guess(support, config):
    """Atoms ``p0_lower``, ``p0_upper`` at the ends plus a uniform interior."""
    lo, hi = config.initial_atom_lower, config.initial_atom_upper
    grid = support.grid(config.grid_size)
    dens = np.full(grid.shape, (1.0 - lo - hi) / support.width)
    return MixingMeasure(support, lo, hi, grid, dens)


# -- the Kullback-Leibler minimizer over mixtures supported on [ell, L] ---------


@dataclass(frozen=True)
class MinimizerCoefficients:
    """Weights of the best uniform mixture supported on ``[ell, L]``.

    ``interior_weight`` multiplies ``P`` restricted to ``[ell, L]`` and
    renormalized by ``P([0, L])``; ``interior_mass`` is the mass it carries.
    """

    atom_lower: float
    interior_weight: float
    atom_upper: float
    interior_mass: float
    cdf_upper: float
    mixing_below_lower: float
    mixing_below_upper: float

    def as_dict(self):
        return dict(self.__dict__)


def kl_minimizer_coefficients(truth, support):
    ell, L = support.lower, support.upper
    ML = float(truth.cdf(L))
    if not ML > 0:
        raise DegenerateMeasureError(f"M({L}) = 0")
    below_ell = truth.mixing_mass(0.0, ell)
    below_L = truth.mixing_mass(0.0, L)
    m_L = float(truth.density(L))
    return MinimizerCoefficients(
        atom_lower=below_ell / ML,
        interior_weight=below_L / ML,
        atom_upper=L * m_L / ML,
        interior_mass=(below_L - below_ell) / ML,
        cdf_upper=ML,
        mixing_below_lower=below_ell,
        mixing_below_upper=below_L,
    )


def kl_minimizer(truth, support, grid_size=1000):
    """Gridded minimizer: endpoint atoms plus interior density ``p(u) / M(L)``.

    The interior is rescaled so its trapezoid mass equals the exact interior
    mass; the atoms are exact.
    """
    co = kl_minimizer_coefficients(truth, support)
    grid = support.grid(grid_size)
    dens = np.asarray(truth.mixing_density(grid), dtype=float) / co.cdf_upper
    tab = float(np.dot(trapezoid_weights(grid), dens))
    if co.interior_mass > 0:
        if not tab > 0:
            raise EvaluationError("mixing density vanishes on the support grid")
        dens = dens * (co.interior_mass / tab)
    else:
        dens = np.zeros_like(dens)
    return MixingMeasure(support, co.atom_lower, co.atom_upper, grid, dens)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_GL_PIECE = 0.05


def _upper_integrals(fn, starts, end):
    """``integral_s^end fn(u) du`` for each ``s`` in ``starts`` (all ``<= end``).

    ``fn`` must be vectorized and smooth on ``(0, end]``. Composite 10-point
    Gauss-Legendre between consecutive starts, on pieces at most 0.05 wide,
    is exact to rounding for the built-in truths and never evaluates at 0.
    """
    starts = np.asarray(starts, dtype=float)
    uniq = np.unique(np.minimum(starts, end))
    knots = np.append(uniq, end)
    widths = np.diff(knots)
    splits = np.maximum(np.ceil(widths / _GL_PIECE), 1).astype(int)
    seg = np.repeat(np.arange(uniq.size), splits)
    j = np.arange(seg.size) - np.repeat(np.cumsum(splits) - splits, splits)
    h = widths[seg] / splits[seg]
    u = (knots[seg] + j * h)[:, None] + h[:, None] * (1 + _GL_NODES) / 2
    piece = (np.asarray(fn(u), dtype=float) @ _GL_WEIGHTS) * h / 2
    pieces = np.bincount(seg, weights=piece, minlength=uniq.size)
    tails = np.cumsum(pieces[::-1])[::-1]
    return tails[np.searchsorted(uniq, np.minimum(starts, end))]


def kl_minimizer_density(truth, support):
    """Mixture density of the exact minimizer, by composite Gauss-Legendre.

    Agrees with the restricted target on ``(ell, L]`` and is constant on
    ``[0, ell]``.
    """
    co = kl_minimizer_coefficients(truth, support)
    ell, L = support.lower, support.upper

    def integrand(u):
        return truth.mixing_density(u) / u

    def m_dagger(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        inside = (flat >= 0) & (flat <= L)
        out = np.zeros(flat.shape)
        if inside.any():
            starts = np.maximum(flat[inside], ell)
            tail = _upper_integrals(integrand, starts, L) / co.cdf_upper
            out[inside] = tail + co.atom_upper / L + np.where(flat[inside] <= ell, co.atom_lower / ell, 0.0)
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)

    m_dagger.coefficients = co
    return m_dagger


def bias_bound(truth, support):
    """Upper bound on ``integral |m_dagger - m|``: ``2 {1 - M(L) + P([0, ell]) / M(L)}``."""
    ML = float(truth.cdf(support.upper))
    if not ML > 0:
        raise DegenerateMeasureError(f"M({support.upper}) = 0")
    return 2.0 * ((1.0 - ML) + truth.mixing_mass(0.0, support.lower) / ML)


def origin_estimate(pr_fit):
    """``m_n(0)``, which equals ``m_n(ell)`` for the uniform-kernel model."""
    return mixture_density(pr_fit.kernel, pr_fit.mixing, 0.0)


@dataclass(frozen=True)
class RestrictedMixing:
    """Mixing distribution of the restricted target: ``pi * P~ + (1 - pi) * delta_L``.

    ``P~`` is ``P`` restricted to ``[0, L]`` and renormalized.
    """

    pi: float
    L: float
    mixing_below_upper: float
    mixing_density: object

    def density_tilde(self, u):
        u = np.asarray(u, dtype=float)
        return np.where((u >= 0) & (u <= self.L), self.mixing_density(u) / self.mixing_below_upper, 0.0)

    def mixture(self, x):
        """``integral Unif(x | 0, u) P^L(du)`` by composite Gauss-Legendre."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        starts = np.clip(x, 0.0, self.L)
        with np.errstate(divide="ignore", invalid="ignore"):
            tails = _upper_integrals(lambda u: self.density_tilde(u) / u, starts, self.L)
        out = self.pi * tails + (1.0 - self.pi) / self.L
        return np.where((x >= 0) & (x <= self.L), out, 0.0)


def restricted_mixing(truth, L):
    L = float(L)
    below = truth.mixing_mass(0.0, L)
    tail = L * float(truth.density(L))
    if not below + tail > 0:
        raise DegenerateMeasureError(f"M({L}) = 0")
    return RestrictedMixing(pi=below / (below + tail), L=L, mixing_below_upper=below,
                            mixing_density=truth.mixing_density)


@dataclass(frozen=True)
class WilliamsonMixing:
    """Mixing distribution recovered from a monotone density: a density plus atoms."""

    density: object
    atoms: tuple = ()

    def __call__(self, u):
        return self.density(u)


def williamson_inverse(density, density_derivative, discontinuities=(), tol=1e-8):
    """Mixing density ``u -> -u m'(u)`` of a non-increasing density ``m``.

    A downward jump of ``m`` at ``c`` contributes an atom of mass
    ``c * (m(c-) - m(c+))``; pass the jump locations in ``discontinuities``.
    A derivative above ``tol`` raises :class:`NonMonotoneError` at
    evaluation time.
    """
    atoms = []
    for c in discontinuities:
        c = float(c)
        eps = 1e-9 * max(1.0, abs(c))
        jump = float(density(c - eps)) - float(density(c + eps))
        if jump < -tol:
            raise NonMonotoneError(f"density jumps upward at {c}")
        if jump > 0:
            atoms.append((c, c * jump))

    def p(u):
        u = np.asarray(u, dtype=float)
        d = np.asarray(density_derivative(u), dtype=float)
        if np.any(d > tol):
            bad = np.broadcast_to(u, d.shape)[d > tol]
            raise NonMonotoneError(f"density increases at u={float(bad.flat[0])!r}")
        out = np.clip(-u * d, 0.0, None)
        return out if out.ndim else float(out)

    return WilliamsonMixing(p, tuple(atoms))


# -- convenience pipeline --------------------------------------------------


def fit_monotone(data, config=None, lower=DEFAULT_LOWER, upper=None, **fit_kwargs):
    """Fit the uniform-mixture model on ``[lower, upper or max(data)]``."""
    config = PrConfig() if config is None else config
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.size == 0:
        raise EmptyDataError("no observations")
    support = build_support(data, lower) if upper is None else SupportInterval(lower, upper)
    P0 = initial_guess(support, config)
    return fit(data, UniformKernel(), P0, config, **fit_kwargs)
