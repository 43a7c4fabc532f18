"""Exception hierarchy shared by every module in the package."""


class PrmixError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PrmixError, ValueError):
    """Invalid configuration value (weights, support bounds, atom masses, names)."""


class InputError(PrmixError, ValueError):
    """Malformed or out-of-domain input data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDataError(InputError):
    """No usable observations remain."""


class DomainError(InputError):
    """Observation outside the domain the estimator accepts (e.g. negative values)."""


class InvalidParameterError(PrmixError, ValueError):
    """Kernel parameter outside its admissible range."""


class EvaluationError(PrmixError, ArithmeticError):
    """A numerical evaluation produced a non-finite or underflowing value."""


class DegenerateMeasureError(EvaluationError):
    """A measure has zero, negative or non-finite total mass."""


class IncompatibleMeasureError(PrmixError, ValueError):
    """Two measures live on different supports or grids."""


class ZeroLikelihoodError(EvaluationError):
    """The mixture density at an observation fell below the density floor."""

    def __init__(self, x, denominator, iteration=None):
        where = "" if iteration is None else f" at iteration {iteration}"
        super().__init__(
            f"mixture density {denominator!r} at x={x!r}{where} is below the density floor; "
            "the observation lies outside the model support"
        )
        self.x = x
        self.denominator = denominator
        self.iteration = iteration


class NonMonotoneError(EvaluationError):
    """A density expected to be non-increasing has a positive derivative."""
