"""Exception hierarchy shared by the estimation pipeline."""


class CovAdjError(Exception):
    """Base class for all package errors."""


class ValidationError(CovAdjError, ValueError):
    """Bad user input: shapes, unknown identifiers, malformed files."""


class NonFiniteError(CovAdjError, ArithmeticError):
    """A model or estimator produced NaN/inf where a finite value is required."""


class MeanCheckError(ValidationError):
    """Sample mean of a distorted series is too close to zero to normalise by."""


class DegenerateBandwidthError(CovAdjError):
    """Every bandwidth candidate left the cross-validation criterion empty."""


class SingularMatrixError(CovAdjError, ArithmeticError):
    """A matrix that must be inverted is singular or not positive definite."""


class ConvexHullError(CovAdjError):
    """Zero is not inside the convex hull of the score vectors.

    The empirical likelihood dual is unbounded in this case, so callers treat
    the likelihood ratio as +inf.
    """


class ConsistencyError(CovAdjError, AssertionError):
    """Two mathematically equivalent computations disagreed (a bug signal)."""
