"""Input validation helpers shared by the core functions and estimators."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError


def as_matrix(x, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a 2-D float64 array with finite entries."""
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"{name} is not numeric: {exc}") from None
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ArgumentError(f"{name} contains non-finite values")
    return arr


def as_vector(x, name: str = "x", dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a 1-D float64 array with finite entries.

    When ``dim`` is given the length must match it exactly.
    """
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"{name} is not numeric: {exc}") from None
    if arr.ndim != 1:
        raise ArgumentError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ArgumentError(f"{name} contains non-finite values")
    if dim is not None and arr.shape[0] != dim:
        raise ArgumentError(f"{name} has length {arr.shape[0]}, expected {dim}")
    return arr


def check_unit_columns(b: np.ndarray, name: str = "bases", tol: float = 1e-6) -> None:
    """Require every column of ``b`` to have unit l2 norm within ``tol``."""
    if b.shape[1] == 0:
        return
    norms = np.linalg.norm(b, axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        j = int(bad[0])
        raise ArgumentError(
            f"{name} column {j} has norm {norms[j]:.9g}, expected 1 within {tol:g}"
        )


def check_positive(value, name: str, strict: bool = True) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ArgumentError(f"{name} must be finite, got {value}")
    if strict and value <= 0:
        raise ArgumentError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ArgumentError(f"{name} must be >= 0, got {value}")
    return value


def check_count(value, name: str, minimum: int = 0) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ArgumentError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ArgumentError(f"{name} must be >= {minimum}, got {value}")
    return value


def frozen_array(arr: np.ndarray) -> np.ndarray:
    """Return a read-only copy, for arrays stored on immutable dataclasses."""
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out
