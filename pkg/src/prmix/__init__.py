"""Predictive recursion for mixture models and monotone density estimation."""
from .baselines import StepDensity, grenander, step_density_at
from .engine import Diagnostics, KLTarget, PrConfig, PrFit, fit, pr_update, t_functional, theorem_bound, weight
from .estimators import GrenanderDensity, PredictiveRecursionDensity
from .exceptions import (
    ConfigurationError,
    DegenerateMeasureError,
    DomainError,
    EmptyDataError,
    EvaluationError,
    IncompatibleMeasureError,
    InputError,
    InvalidParameterError,
    NonMonotoneError,
    PrmixError,
    ZeroLikelihoodError,
)
from .kernels import GaussianKernel, Kernel, UniformKernel, gaussian_kernel, mixture_density, uniform_kernel
from .measure import MixingMeasure, SupportInterval, normalize, quadrature, weak_distance
from .metrics import DensityPair, hellinger_contrast, hellinger_distance, kl_divergence, l1_distance
from .monotone import (
    MonotoneTruth,
    RestrictedTarget,
    bias_bound,
    build_support,
    exponential_truth,
    fit_monotone,
    get_truth,
    halfnormal_truth,
    initial_guess,
    kl_minimizer,
    kl_minimizer_density,
    origin_estimate,
    restrict_target,
    williamson_inverse,
)

__version__ = "0.1.0"
