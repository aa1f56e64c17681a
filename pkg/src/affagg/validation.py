"""Input validation helpers.

Small checks shared by the estimator API and the numeric core. They coerce
inputs to float64 arrays and raise structured errors naming the offending
argument and the expected/actual sizes.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, DomainError


def as_vector(x, name: str, size: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-d float64 array, optionally of a fixed size."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(name, "(n,)", arr.shape)
    if size is not None and arr.shape[0] != size:
        raise DimensionMismatch(name, (size,), arr.shape)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def as_matrix(x, name: str, shape: tuple[int | None, int | None] = (None, None)) -> np.ndarray:
    """Coerce to a finite 2-d float64 array, optionally with fixed dimensions."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(name, "(n, m)", arr.shape)
    rows, cols = shape
    if rows is not None and arr.shape[0] != rows:
        raise DimensionMismatch(name, (rows, cols), arr.shape)
    if cols is not None and arr.shape[1] != cols:
        raise DimensionMismatch(name, (rows, cols), arr.shape)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_nonnegative(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be a nonnegative finite number, got {value!r}")
    return value


def check_index(value: int, name: str, size: int) -> int:
    value = int(value)
    if not 0 <= value < size:
        raise DomainError(f"{name} must be in [0, {size}), got {value}")
    return value


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return a read-only copy; used to keep dataclass fields immutable."""
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out
