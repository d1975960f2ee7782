"""Input validation helpers for array arguments."""

import numpy as np

from .exceptions import DataError


def check_matrix(A, name="matrix", min_rows=1, min_cols=1):
    """Return ``A`` as a finite float64 2-D array or raise :class:`DataError`."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DataError(f"{name} must be 2-D, got {A.ndim} dimension(s)")
    rows, cols = A.shape
    if rows < min_rows or cols < min_cols:
        raise DataError(
            f"{name} must be at least {min_rows}x{min_cols}, got {rows}x{cols}"
        )
    if not np.all(np.isfinite(A)):
        raise DataError(f"{name} contains NaN or infinite entries")
    return A


def check_vector(x, name="vector", length=None):
    """Return ``x`` as a finite float64 1-D array or raise :class:`DataError`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and 1 in x.shape:
        x = x.ravel()
    if x.ndim != 1:
        raise DataError(f"{name} must be 1-D, got shape {x.shape}")
    if length is not None and x.size != length:
        raise DataError(f"{name} must have length {length}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{name} contains NaN or infinite entries")
    return x


def check_indices(idx, n, name="indices", require_distinct=True):
    """Return ``idx`` as an int64 1-D array of valid positions in ``[0, n)``."""
    idx = np.asarray(idx)
    if idx.ndim != 1:
        raise DataError(f"{name} must be 1-D, got shape {idx.shape}")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        as_int = idx.astype(np.int64)
        if not np.array_equal(as_int, idx):
            raise DataError(f"{name} must be integers")
        idx = as_int
    idx = idx.astype(np.int64, copy=False)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        bad = idx[(idx < 0) | (idx >= n)][0]
        raise DataError(f"{name}: index {bad} out of range [0, {n})")
    if require_distinct and np.unique(idx).size != idx.size:
        raise DataError(f"{name} must be distinct")
    return idx
