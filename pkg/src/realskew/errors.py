"""Exception hierarchy shared by all modules."""


class RealSkewError(Exception):
    """Base class for package errors."""


class ConfigurationError(RealSkewError, ValueError):
    """Invalid or inconsistent model/scenario parameters."""


class DomainError(RealSkewError, ValueError):
    """Argument outside the domain of an operation."""


class GenerationError(RealSkewError, RuntimeError):
    """A random scheme produced an invalid object (e.g. non-increasing times)."""


class ConsistencyError(RealSkewError, RuntimeError):
    """Internal bookkeeping mismatch, e.g. observation time missing from the grid."""


class DegenerateDenominatorError(RealSkewError, ArithmeticError):
    """A ratio statistic had a denominator at or below its guard threshold."""


class KernelValidityError(RealSkewError, ValueError):
    """Weight function violates a pre-averaging requirement."""
