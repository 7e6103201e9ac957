"""Small input validation helpers shared by the estimators and the solvers."""

from __future__ import annotations

import numpy as np


def as_complex_vector(z, d: int | None = None, name: str = "z") -> np.ndarray:
    """Return ``z`` as a 1-D complex array, optionally checking its length."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise ValueError(f"{name} must have length {d}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_complex_array(X, d: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a batch of points, one per row.

    scikit-learn's ``check_array`` rejects complex input, so this is the
    complex-aware counterpart used by the estimator wrappers.
    """
    arr = np.asarray(X, dtype=complex)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n_samples, d), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} has no samples")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _real_array(a, name: str) -> np.ndarray:
    try:
        arr = np.asarray(a, dtype=float)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be numeric") from None
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def as_int_matrix(a, name: str) -> np.ndarray:
    arr = _real_array(a, name)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D integer array")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError(f"{name} must have integer entries")
    return arr.astype(np.int64)


def as_int_vector(a, name: str, length: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(_real_array(a, name))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D integer vector")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError(f"{name} must have integer entries")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr.astype(np.int64)


def check_hermitian_blocks(mats) -> list[np.ndarray]:
    """Symmetrize each matrix with its adjoint to remove roundoff asymmetry."""
    return [0.5 * (np.asarray(x) + np.asarray(x).conj().T) for x in mats]
