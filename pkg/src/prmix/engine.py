"""Predictive recursion: single updates, permutation-averaged fits, diagnostics.

The interior density is updated node by node with the kernel integrated
against each node's hat function. Combined with a denominator computed
from the same integrals this conserves mass exactly; the renormalization
after each step only removes floating-point rounding.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, EmptyDataError, EvaluationError, ZeroLikelihoodError
from .measure import MixingMeasure, average, normalize, quadrature, trapezoid_weights
from .metrics import DensityPair, kl_divergence

WEIGHT_BOUND = 2.0 / 9.0
_T_GAUSS_POINTS = 4


@dataclass(frozen=True)
class PrConfig:
    """Tuning constants for a PR fit.

    ``weight_constant`` is ``a`` in ``w_i = a / (i + 1)`` and must lie in
    ``(0, 2/9)``. ``seed`` seeds permutation ``r`` with ``seed + r``.
    """

    weight_constant: float = 0.1
    grid_size: int = 1000
    permutations: int = 25
    initial_atom_lower: float = 0.05
    initial_atom_upper: float = 0.05
    seed: int = 0
    density_floor: float = 1e-300

    def __post_init__(self):
        a = float(self.weight_constant)
        if not 0 < a < WEIGHT_BOUND:
            raise ConfigurationError(f"weight_constant must lie in (0, 2/9), got {a}")
        if int(self.grid_size) != self.grid_size or self.grid_size < 2:
            raise ConfigurationError(f"grid_size must be an integer >= 2, got {self.grid_size}")
        if int(self.permutations) != self.permutations or self.permutations < 1:
            raise ConfigurationError(f"permutations must be an integer >= 1, got {self.permutations}")
        lo, hi = float(self.initial_atom_lower), float(self.initial_atom_upper)
        if not (0 < lo < 1 and 0 < hi < 1 and lo + hi < 1):
            raise ConfigurationError(
                f"initial atom masses must be in (0, 1) with sum < 1, got {lo} and {hi}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not self.density_floor > 0:
            raise ConfigurationError("density_floor must be positive")
        object.__setattr__(self, "weight_constant", a)
        object.__setattr__(self, "grid_size", int(self.grid_size))
        object.__setattr__(self, "permutations", int(self.permutations))
        object.__setattr__(self, "initial_atom_lower", lo)
        object.__setattr__(self, "initial_atom_upper", hi)
        object.__setattr__(self, "seed", int(self.seed))

    def replace(self, **changes):
        params = {k: getattr(self, k) for k in self.__dataclass_fields__}
        params.update(changes)
        return PrConfig(**params)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def weight(i, a):
    """Step size ``a / (i + 1)`` for the ``i``-th observation."""
    if not 0 < a < WEIGHT_BOUND:
        raise ConfigurationError(f"weight constant must lie in (0, 2/9), got {a}")
    if int(i) != i or i < 1:
        raise ConfigurationError(f"iteration index must be a positive integer, got {i}")
    return a / (i + 1)


@dataclass(frozen=True)
class KLTarget:
    """True density against which ``K(m_star, m_i)`` is traced."""

    density: object
    integration_range: tuple
    resolution: int = 2000
    breakpoints: tuple = ()


@dataclass
class Diagnostics:
    """Per-iteration trace, one row per (permutation, iteration).

    ``mass`` is the total mass after the update, before renormalization;
    ``kl`` is NaN unless a target was supplied; ``probe_min`` is the smallest
    mixture density over the probe points after the update (NaN without
    probes).
    """

    permutation: np.ndarray
    iteration: np.ndarray
    weight: np.ndarray
    denominator: np.ndarray
    mass: np.ndarray
    kl: np.ndarray
    probe_min: np.ndarray
    has_kl: bool = False

    @classmethod
    def concat(cls, parts):
        if not parts:
            empty = np.empty(0)
            return cls(np.empty(0, dtype=int), np.empty(0, dtype=int), empty, empty, empty, empty, empty)
        cols = {}
        for name in ("permutation", "iteration", "weight", "denominator", "mass", "kl", "probe_min"):
            cols[name] = np.concatenate([getattr(p, name) for p in parts])
        return cls(**cols, has_kl=any(p.has_kl for p in parts))

    def __len__(self):
        return len(self.iteration)

    def rows(self, permutation=None):
        keep = np.ones(len(self), dtype=bool) if permutation is None else self.permutation == permutation
        return np.flatnonzero(keep)

    def to_csv(self, path_or_file, permutation=0):
        """Write ``iteration,weight,denominator[,kl]`` for one permutation."""
        header = ["iteration", "weight", "denominator"] + (["kl"] if self.has_kl else [])
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for r in self.rows(permutation):
                row = [int(self.iteration[r]), repr(float(self.weight[r])), repr(float(self.denominator[r]))]
                if self.has_kl:
                    k = self.kl[r]
                    row.append("" if np.isnan(k) else repr(float(k)))
                writer.writerow(row)
        finally:
            if own:
                fh.close()


@dataclass
class PrFit:
    """Result of :func:`fit`."""

    mixing: MixingMeasure
    per_permutation: list
    diagnostics: Diagnostics
    n_used: int
    n_dropped: int
    kernel: object = None
    config: PrConfig = None
    extra: dict = field(default_factory=dict)

    def density(self, x):
        from .kernels import mixture_density

        return mixture_density(self.kernel, self.mixing, x)


class _State:
    """Working copy of a measure inside the update loop.

    The interior density is ``scale * q``: the ``(1 - w)`` shrink applies to
    every node and is kept in ``scale``, so a step only touches the nodes
    where the kernel weights are non-zero.
    """

    __slots__ = ("measure", "lo", "hi", "q", "scale", "c", "columns", "k_lo", "k_hi", "kernel", "raw_mass")

    def __init__(self, measure, kernel, columns=None):
        self.measure = measure
        self.kernel = kernel
        self.lo = measure.atom_lower
        self.hi = measure.atom_upper
        self.q = measure.density.copy()
        self.scale = 1.0
        self.raw_mass = measure.total_mass
        self.c = trapezoid_weights(measure.grid)
        self.columns = kernel.column_provider(measure.grid) if columns is None else columns
        s = measure.support
        self.k_lo, self.k_hi = s.lower, s.upper

    def step(self, x, w, floor, iteration=None):
        k_lo, k_hi = self.kernel.endpoint_values(x, self.k_lo, self.k_hi)
        start, head, tail, tail_c = self.columns(x)
        q = self.q
        nh = head.size
        qh = q[start:start + nh]
        qt = q[start + nh:]
        interior = float(np.dot(head, qh)) + float(np.dot(tail, qt))
        d = self.lo * k_lo + self.hi * k_hi + self.scale * interior
        if not d > floor:
            raise ZeroLikelihoodError(x, d, iteration)
        keep = 1.0 - w
        beta = w / (d * keep)
        if nh:
            qh *= 1.0 + beta * head / self.c[start:start + nh]
        if tail.size:
            qt *= 1.0 + beta * tail_c
        self.scale *= keep
        self.lo *= keep + w * k_lo / d
        self.hi *= keep + w * k_hi / d
        # exact in real arithmetic; dividing out removes rounding drift
        total = self.raw_mass = self.mass()
        self.scale /= total
        self.lo /= total
        self.hi /= total
        if self.scale < 1e-150:
            q *= self.scale
            self.scale = 1.0
        return d

    def density(self):
        return self.scale * self.q

    def mass(self):
        return self.lo + self.hi + self.scale * float(np.dot(self.c, self.q))

    def freeze(self):
        return self.measure.replace(self.lo, self.hi, self.density())


def pr_update(P_prev, x, w, kernel, density_floor=1e-300):
    """One predictive recursion step: mix ``P_prev`` with its posterior given ``x``."""
    if not 0 < w < 1:
        raise ConfigurationError(f"weight must lie in (0, 1), got {w}")
    state = _State(P_prev, kernel)
    state.step(float(x), float(w), density_floor)
    return state.freeze()


def _observation_range(kernel, P0):
    lo, hi = kernel.observation_support(P0.support.upper)
    lo2, _ = kernel.observation_support(P0.support.lower)
    return min(lo, lo2), hi


def _filter(data, kernel, P0):
    data = np.asarray(data, dtype=float).reshape(-1)
    if not np.all(np.isfinite(data)):
        raise EvaluationError("observations must be finite")
    lo, hi = _observation_range(kernel, P0)
    keep = (data >= lo) & (data <= hi)
    return data[keep], int((~keep).sum())


def permutation_order(n, seed, index):
    """Seeded Fisher-Yates permutation of ``range(n)`` for permutation ``index``."""
    rng = np.random.Generator(np.random.PCG64(seed + index))
    return rng.permutation(n)


def _run_permutation(data, kernel, P0, config, r, target, kl_iterations, probe_weights, columns):
    order = permutation_order(data.size, config.seed, r)
    n = data.size
    state = _State(P0, kernel, columns)
    dens = np.empty(n)
    weights = np.empty(n)
    mass = np.empty(n)
    kl = np.full(n, np.nan)
    probe_min = np.full(n, np.nan)
    for i in range(1, n + 1):
        w = config.weight_constant / (i + 1)
        x = data[order[i - 1]]
        dens[i - 1] = state.step(x, w, config.density_floor, iteration=i)
        weights[i - 1] = w
        mass[i - 1] = state.raw_mass
        if probe_weights is not None:
            W, k_lo, k_hi = probe_weights
            m = state.scale * (W @ state.q) + state.lo * k_lo + state.hi * k_hi
            probe_min[i - 1] = float(m.min())
        if target is not None and (kl_iterations is None or i in kl_iterations):
            kl[i - 1] = _kl_of_state(state, kernel, target)
    diag = Diagnostics(
        np.full(n, r, dtype=int), np.arange(1, n + 1), weights, dens, mass, kl, probe_min, has_kl=target is not None
    )
    return state.freeze(), diag


def _kl_of_state(state, kernel, target):
    m = state.freeze()
    return kl_divergence(
        DensityPair(target.density, lambda x: kernel.mixture_values(x, m), target.integration_range,
                    target.resolution, target.breakpoints)
    )


def fit(data, kernel, P0, config, *, target=None, kl_iterations=None, probes=None):
    """Run predictive recursion over ``config.permutations`` seeded orderings of ``data``.

    Observations outside the widest kernel support (for the uniform kernel,
    above the support's upper end) are dropped and counted. An empty input
    returns ``P0`` unchanged; a non-empty input with every point dropped is
    an error.

    Parameters
    ----------
    data : array-like of observations
    kernel : Kernel
    P0 : MixingMeasure
        Initial guess; fixes support and grid.
    config : PrConfig
    target : KLTarget, optional
        When given, ``K(target, m_i)`` is recorded in the diagnostics.
    kl_iterations : iterable of int, optional
        Restrict KL evaluation to these iterations (default: all).
    probes : array-like, optional
        Points at which the minimum mixture density is tracked per step.
    """
    P0.check_mass()
    raw = np.asarray(data, dtype=float).reshape(-1)
    used, dropped = _filter(raw, kernel, P0)
    if raw.size and not used.size:
        raise EmptyDataError(f"all {raw.size} observations fall outside the model support")
    kl_iterations = None if kl_iterations is None else set(int(i) for i in kl_iterations)

    probe_weights = None
    if probes is not None:
        probes = np.asarray(probes, dtype=float).reshape(-1)
        s = P0.support
        probe_weights = (
            np.vstack([kernel.grid_weights(x, P0.grid) for x in probes]),
            np.array([kernel.evaluate(x, s.lower) for x in probes]),
            np.array([kernel.evaluate(x, s.upper) for x in probes]),
        )

    if not used.size:
        return PrFit(P0, [P0] * config.permutations, Diagnostics.concat([]), 0, dropped, kernel, config)

    columns = kernel.column_provider(P0.grid)
    finals, traces = [], []
    for r in range(config.permutations):
        try:
            measure, diag = _run_permutation(
                used, kernel, P0, config, r, target, kl_iterations, probe_weights, columns
            )
        except ZeroLikelihoodError as exc:
            exc.args = (f"permutation {r}: {exc.args[0]}",)
            raise
        finals.append(measure)
        traces.append(diag)
    mixing = normalize(average(finals))
    return PrFit(
        mixing=mixing,
        per_permutation=finals,
        diagnostics=Diagnostics.concat(traces),
        n_used=int(used.size),
        n_dropped=dropped,
        kernel=kernel,
        config=config,
    )


def t_functional(P, m_star, kernel, x_grid, tol=1e-6):
    """Lyapunov functional ``T(P) = integral g_P(u)^2 P(du) - 1``.

    ``g_P(u) = integral m_star(x) / m_P(x) k(x | u) dx`` over ``x_grid``.
    ``T`` is non-negative and vanishes at the Kullback-Leibler minimizer.
    """
    x = np.asarray(x_grid, dtype=float)
    ms = np.asarray(m_star(x), dtype=float) * np.ones_like(x)
    mp = kernel.mixture_values(x, P)
    need = ms > 0
    if np.any(mp[need] < 1e-300):
        bad = x[need][np.argmax(mp[need] < 1e-300)]
        raise EvaluationError(f"m_P underflows at x={bad!r} where m_star is positive")
    ratio = np.zeros_like(ms)
    ratio[need] = ms[need] / mp[need]

    s = P.support
    atoms = kernel.observation_integrals(x, ratio, np.array([s.lower, s.upper])) ** 2
    # Gauss-Legendre inside each cell: exact for the linear density times a smooth g^2
    nodes, gw = np.polynomial.legendre.leggauss(_T_GAUSS_POINTS)
    g, p = P.grid, P.density
    half = np.diff(g)[:, None] / 2
    u = (g[:-1, None] + g[1:, None]) / 2 + half * nodes[None, :]
    t = (nodes[None, :] + 1) / 2
    p_u = p[:-1, None] * (1 - t) + p[1:, None] * t
    g2 = kernel.observation_integrals(x, ratio, u.reshape(-1)).reshape(u.shape) ** 2
    interior = float(np.sum(half * gw[None, :] * p_u * g2))
    value = P.atom_lower * atoms[0] + P.atom_upper * atoms[1] + interior - 1.0
    if value < -tol:
        raise EvaluationError(f"T(P) = {value:.3e} is negative beyond numerical slack")
    return value


def theorem_bound(initial_atom_upper, upper, weights):
    """Running lower bound ``p0_L / L * prod(1 - w_j)`` on the uniform mixture over ``[0, L]``."""
    return initial_atom_upper / upper * np.cumprod(1.0 - np.asarray(weights, dtype=float))


__all__ = [
    "PrConfig",
    "PrFit",
    "Diagnostics",
    "KLTarget",
    "weight",
    "pr_update",
    "fit",
    "t_functional",
    "theorem_bound",
    "permutation_order",
]
