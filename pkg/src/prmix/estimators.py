"""Scikit-learn style density estimators for non-increasing densities on ``[0, inf)``."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import grenander
from .engine import PrConfig
from .exceptions import DomainError, EmptyDataError
from .monotone import DEFAULT_LOWER, fit_monotone, origin_estimate


def check_observations(X, *, allow_empty=False):
    """Validate a sample of non-negative observations and return it as a 1-d array.

    Accepts shape ``(n,)`` or ``(n, 1)``.
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.size == 0:
        if allow_empty:
            return np.empty(0)
        raise EmptyDataError("no observations")
    arr = check_array(arr, dtype=np.float64, ensure_2d=True)
    if arr.shape[1] != 1:
        raise DomainError(f"expected a single feature, got {arr.shape[1]}")
    x = arr[:, 0]
    if np.any(x < 0):
        raise DomainError(f"observations must be non-negative, got {float(x.min())!r}")
    return x


def _evaluation_points(X):
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise DomainError(f"expected a single feature, got {arr.shape[1]}")
        arr = arr[:, 0]
    return arr


class _DensityMixin:
    def pdf(self, X):
        """Estimated density at each point of ``X``."""
        check_is_fitted(self)
        return self._pdf(_evaluation_points(X))

    def score_samples(self, X):
        """Log density at each point; ``-inf`` outside the estimated support."""
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(X))

    def score(self, X, y=None):
        """Mean log density of ``X``."""
        return float(np.mean(self.score_samples(X)))


class PredictiveRecursionDensity(_DensityMixin, BaseEstimator):
    """Monotone density estimate from a predictive recursion fit of a uniform scale mixture.

    The mixing distribution lives on ``[lower, max(X)]`` (or ``[lower,
    upper]`` when ``upper`` is given) and starts from point masses at both
    ends plus a uniform interior.

    Parameters
    ----------
    lower : float, default=1e-5
        Left end of the mixing support.
    upper : float or None, default=None
        Right end; ``None`` uses the sample maximum.
    weight_constant : float, default=0.1
        ``a`` in the step sizes ``a / (i + 1)``; must lie in ``(0, 2/9)``.
    grid_size, permutations, initial_atom_lower, initial_atom_upper, seed
        See :class:`prmix.engine.PrConfig`.

    Attributes
    ----------
    fit_ : PrFit
    mixing_ : MixingMeasure
    n_used_, n_dropped_ : int
    """

    def __init__(
        self,
        lower=DEFAULT_LOWER,
        upper=None,
        weight_constant=0.1,
        grid_size=1000,
        permutations=25,
        initial_atom_lower=0.05,
        initial_atom_upper=0.05,
        seed=0,
    ):
        self.lower = lower
        self.upper = upper
        self.weight_constant = weight_constant
        self.grid_size = grid_size
        self.permutations = permutations
        self.initial_atom_lower = initial_atom_lower
        self.initial_atom_upper = initial_atom_upper
        self.seed = seed

    def config(self):
        return PrConfig(
            weight_constant=self.weight_constant,
            grid_size=self.grid_size,
            permutations=self.permutations,
            initial_atom_lower=self.initial_atom_lower,
            initial_atom_upper=self.initial_atom_upper,
            seed=self.seed,
        )

    def fit(self, X, y=None, **fit_kwargs):
        x = check_observations(X)
        result = fit_monotone(x, self.config(), lower=self.lower, upper=self.upper, **fit_kwargs)
        self.fit_ = result
        self.mixing_ = result.mixing
        self.n_used_ = result.n_used
        self.n_dropped_ = result.n_dropped
        return self

    def _pdf(self, x):
        return np.asarray(self.fit_.density(x), dtype=float)

    def origin_density(self):
        check_is_fitted(self)
        return origin_estimate(self.fit_)


class GrenanderDensity(_DensityMixin, BaseEstimator):
    """Grenander estimator: left derivative of the least concave majorant of the ECDF.

    Attributes
    ----------
    step_ : StepDensity
    """

    def fit(self, X, y=None):
        self.step_ = grenander(check_observations(X))
        return self

    def _pdf(self, x):
        return np.asarray(self.step_(x), dtype=float)

    def origin_density(self):
        check_is_fitted(self)
        return float(self.step_(0.0))
