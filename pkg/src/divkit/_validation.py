"""Input validation helpers shared by the public API."""

from __future__ import annotations

import numbers

import numpy as np


class DivkitError(Exception):
    """Base class for library errors."""


class ValidationError(DivkitError, ValueError):
    """Bad user input: wrong shapes, unknown names, out-of-range values."""


class NumericalError(DivkitError, ArithmeticError):
    """A computation failed numerically (factorization, non-finite values, non-convergence)."""


def as_vector(x, name: str = "x", dim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValidationError(f"{name} has length {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_square_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_count(n, name: str = "n", minimum: int = 1) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        else:
            raise ValidationError(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if n < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {n}")
    return n


def check_nonnegative(u, name: str = "u") -> float:
    u = float(u)
    if not np.isfinite(u) or u < 0:
        raise ValidationError(f"{name} must be a finite nonnegative real, got {u!r}")
    return u
