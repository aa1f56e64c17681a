"""Exception types shared across the package."""

from __future__ import annotations


class AffAggError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(AffAggError, ValueError):
    """Raised when an array does not have the expected shape."""

    def __init__(self, name: str, expected, actual):
        self.name = name
        self.expected = expected
        self.actual = actual
        super().__init__(f"{name}: expected shape {expected}, got {actual}")


class DomainError(AffAggError, ValueError):
    """Raised when a scalar argument is outside its admissible domain."""


class ConvergenceError(AffAggError, RuntimeError):
    """Raised when an iterative routine fails to converge.

    Carries the best estimate reached so the caller can inspect it.
    """

    def __init__(self, message: str, best_estimate: float):
        self.best_estimate = best_estimate
        super().__init__(f"{message} (best estimate: {best_estimate!r})")


class EnumerationCapError(AffAggError, ValueError):
    """Raised when a combinatorial enumeration would exceed its configured cap."""

    def __init__(self, message: str, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"{message}: {count} items exceeds cap {cap}")


class AggregationError(AffAggError, RuntimeError):
    """Raised when an aggregation procedure cannot produce a usable result."""

    def __init__(self, message: str, solve_result=None):
        self.solve_result = solve_result
        super().__init__(message)


class ConfigError(AffAggError, ValueError):
    """Raised on invalid experiment configuration; maps to CLI exit code 2."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")


class AdmissibilityWarning(UserWarning):
    """Emitted when an assumption backing a risk bound is violated.

    Procedures still run; the warning flags that the corresponding guarantee
    may not apply (e.g. a linear part with operator norm above 1).
    """
