"""Error types shared across the toolkit.

Every failure mode raised by the library is a subclass of QuantizationError,
so callers can catch one base class at batch boundaries and still branch on
the specific condition when they need to.
"""


class QuantizationError(Exception):
    """Base class for all toolkit errors."""


class InvalidModulus(QuantizationError):
    """Torus modulus tau must have Im(tau) > 0."""


class UnderResolved(QuantizationError):
    """Quadrature resolution is too low for the requested computation."""


class NonFiniteIntegrand(QuantizationError):
    """An integrand evaluated to NaN or infinity at a quadrature node."""


class UnknownSelector(QuantizationError):
    """Observable selector not recognized for the given model."""


class LevelInvalid(QuantizationError):
    """Tensor-power level m must be a positive integer."""


class NotPositiveDefinite(QuantizationError):
    """A Gram matrix failed its Cholesky factorization."""


class DimensionMismatch(QuantizationError):
    """Operands live on different models, levels, or vector sizes."""


class OracleMissing(QuantizationError):
    """An operation needed a derivative oracle the observable does not carry."""


class KernelZero(QuantizationError):
    """A two-point kernel denominator fell below the numerical floor."""


class NonFiniteLog(QuantizationError):
    """log of a kernel diagonal that is zero, negative, or non-finite."""


class IllConditioned(QuantizationError):
    """An asymptotic fit was rejected (condition number or too few levels)."""


class RankDeficient(QuantizationError):
    """A family of operators spans less than the full matrix algebra."""

    def __init__(self, message, rank=None, expected=None):
        super().__init__(message)
        self.rank = rank
        self.expected = expected


class ConfigInvalid(QuantizationError):
    """An experiment configuration failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class IoError(QuantizationError):
    """Report output could not be written."""
