"""Exception hierarchy.

Input problems derive from ``ValueError`` and numerical failures from
``ArithmeticError`` so the CLI can map them to distinct exit codes.
"""


class InputError(ValueError):
    """Malformed user input: unknown names, unparseable files, bad configs."""


class DomainError(InputError):
    """Argument outside the mathematical domain of an operation."""


class RestrictionError(InputError):
    """Restriction map with rank-deficient Jacobian or wrong shape."""


class NumericError(ArithmeticError):
    """Base class for numerical failures."""


class QuadratureError(NumericError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether it is good enough.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class MatrixError(NumericError):
    """Singular or non-finite matrix where an invertible one is required."""


class ConvergenceError(NumericError):
    """Iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, best=None, gradient_norm=float("nan"), iterations=0):
        super().__init__(message)
        self.best = best
        self.gradient_norm = gradient_norm
        self.iterations = iterations


class StepFailureError(ConvergenceError):
    """A single fixed-point step could not be taken (e.g. non-positive denominator)."""


class DegenerateSampleError(NumericError):
    """Sample carries no information for the requested family (e.g. zero spread)."""


class ConditioningWarning(RuntimeWarning):
    """A matrix was inverted despite a condition number above 1e12."""
