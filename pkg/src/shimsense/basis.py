"""Feature-basis learning from historical gap data.

Stacks per-unit gap vectors into a matrix, removes outliers with the robust
low-rank decomposition, and truncates the spectrum at the optimal hard
threshold to obtain an orthonormal feature basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_vector
from .exceptions import ConvergenceError, DataError
from .linalg import svd
from .rpca import rpca


@dataclass(eq=False)
class TrainingSet:
    """Gap measurements for several units, one column per unit.

    ``X`` has shape (n_locations, n_units); entries are gap values in inches.
    Missing entries are rejected up front, they are not a concern of this
    layer.
    """

    X: np.ndarray
    unit_ids: list

    def __post_init__(self):
        self.X = check_matrix(self.X, "X", min_cols=2)
        self.unit_ids = list(self.unit_ids)
        if len(self.unit_ids) != self.X.shape[1]:
            raise DataError(
                f"{len(self.unit_ids)} unit ids for {self.X.shape[1]} columns"
            )
        if self.X.shape[0] < self.X.shape[1]:
            warnings.warn(
                "fewer measurement locations than units; the model assumes "
                "many more locations than units",
                UserWarning,
            )

    @property
    def n_locations(self):
        return self.X.shape[0]

    @property
    def n_units(self):
        return self.X.shape[1]


def build_matrix(units, unit_ids=None) -> TrainingSet:
    """Stack per-unit gap vectors as the columns of a training matrix.

    Raises :class:`DataError` naming the offending unit when the vectors do
    not all share one length.
    """
    units = list(units)
    if len(units) < 2:
        raise DataError("need at least two units to build a training matrix")
    if unit_ids is None:
        unit_ids = list(range(len(units)))
    unit_ids = list(unit_ids)
    if len(unit_ids) != len(units):
        raise DataError(f"{len(unit_ids)} unit ids for {len(units)} units")
    first = check_vector(units[0], f"unit {unit_ids[0]!r}")
    n = first.size
    if n < 1:
        raise DataError(f"unit {unit_ids[0]!r} is empty")
    columns = [first]
    for uid, vec in zip(unit_ids[1:], units[1:]):
        vec = check_vector(vec, f"unit {uid!r}")
        if vec.size != n:
            raise DataError(
                f"unit {uid!r} has {vec.size} values, expected {n}"
            )
        columns.append(vec)
    return TrainingSet(np.column_stack(columns), unit_ids)


def optimal_threshold_coefficient(beta):
    """Hard-threshold coefficient omega(beta) for unknown noise level.

    Cubic approximation of the optimal singular-value truncation coefficient
    as a function of the aspect ratio ``beta = min(n, m) / max(n, m)``.
    """
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    return 0.56 * beta**3 - 0.95 * beta**2 + 1.82 * beta + 1.43


def optimal_threshold(singular_values, n, m):
    """Truncation threshold ``omega(beta) * median(s)`` with a numerical floor.

    The floor ``max(n, m) * eps * s[0]`` keeps exactly low-rank inputs from
    counting roundoff-level singular values: for such inputs the median sits
    at the noise floor, making the plain rule vacuous.
    """
    s = _check_spectrum(singular_values)
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise ValueError("matrix dimensions must be positive")
    if s[0] == 0.0:
        return 0.0
    beta = min(n, m) / max(n, m)
    tau = optimal_threshold_coefficient(beta) * float(np.median(s))
    floor = max(n, m) * np.finfo(np.float64).eps * float(s[0])
    return max(tau, floor)


def optimal_rank(singular_values, n, m):
    """Number of singular values strictly above the optimal hard threshold.

    Always at least 1; an all-zero spectrum returns 1 with a warning.
    """
    s = _check_spectrum(singular_values)
    if s[0] == 0.0:
        warnings.warn("all singular values are zero; returning rank 1",
                      UserWarning)
        return 1
    tau = optimal_threshold(s, n, m)
    return max(int(np.count_nonzero(s > tau)), 1)


def _check_spectrum(singular_values):
    s = check_vector(singular_values, "singular_values")
    if s.size < 1:
        raise DataError("singular_values must be non-empty")
    if np.any(s < 0):
        raise DataError("singular_values must be non-negative")
    if np.any(s[1:] > s[:-1] + 1e-12 * max(float(s[0]), 1.0)):
        raise DataError("singular_values must be sorted in descending order")
    return s


@dataclass(eq=False)
class FeatureBasis:
    """Truncated robust principal components of the training data.

    ``modes`` is (n_locations, rank) with orthonormal columns; the full
    spectrum of the low-rank matrix and the threshold used to cut it are kept
    for auditability. ``location_mean`` is present only when the basis was
    built from mean-centered data.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    rank: int
    truncation_threshold: float
    location_mean: np.ndarray | None = None

    def __post_init__(self):
        self.modes = check_matrix(self.modes, "modes")
        self.rank = int(self.rank)
        if self.rank != self.modes.shape[1] or self.rank < 1:
            raise DataError(
                f"rank {self.rank} does not match modes shape {self.modes.shape}"
            )
        if self.location_mean is not None:
            self.location_mean = check_vector(
                self.location_mean, "location_mean", length=self.modes.shape[0]
            )

    @property
    def n_locations(self):
        return self.modes.shape[0]


def truncate_basis(low_rank, rank="auto", location_mean=None) -> FeatureBasis:
    """SVD a low-rank matrix and keep the leading modes.

    ``rank="auto"`` applies the optimal hard threshold to the spectrum;
    an integer keeps exactly that many modes.
    """
    L = check_matrix(low_rank, "low_rank")
    n, m = L.shape
    dec = svd(L)
    threshold = optimal_threshold(dec.s, n, m) if dec.s[0] > 0 else 0.0
    if rank == "auto":
        r = optimal_rank(dec.s, n, m)
    else:
        r = int(rank)
        if not 1 <= r <= min(n, m):
            raise DataError(f"rank must be in [1, {min(n, m)}], got {r}")
    return FeatureBasis(
        modes=dec.U[:, :r].copy(),
        singular_values=dec.s,
        rank=r,
        truncation_threshold=threshold,
        location_mean=location_mean,
    )


def extract_basis(data, *, rank="auto", lam="auto", mu="auto", tol=1e-7,
                  max_iter=500, center=False,
                  require_convergence=True) -> FeatureBasis:
    """Learn the feature basis from a training set.

    Runs the robust low-rank decomposition, then truncates the SVD of the
    low-rank part at the optimal hard threshold (or at ``rank``).

    Parameters
    ----------
    data : TrainingSet or array_like of shape (n_locations, n_units)
    center : bool
        Subtract the per-location mean before decomposing. Off by default;
        the learned mean, when enabled, rides along in the basis and is
        honored during reconstruction.
    require_convergence : bool
        When True (default) a decomposition that hits the iteration cap
        raises :class:`ConvergenceError`; when False it warns and the partial
        result is used.
    """
    ts = as_training_set(data)
    X = ts.X
    mean = X.mean(axis=1) if center else None
    work = X - mean[:, None] if center else X
    result = rpca(work, lam=lam, mu=mu, tol=tol, max_iter=max_iter)
    if not result.converged:
        msg = (
            f"robust decomposition stopped at iteration {result.n_iter} with "
            f"residual {result.residual_history[-1]:.3e} above tolerance {tol:g}"
        )
        if require_convergence:
            raise ConvergenceError(msg, n_iter=result.n_iter,
                                   residual=result.residual_history[-1])
        warnings.warn(msg + "; continuing with the partial decomposition",
                      UserWarning)
    return truncate_basis(result.low_rank, rank=rank, location_mean=mean)


def as_training_set(data) -> TrainingSet:
    """Coerce a matrix (columns are units) into a :class:`TrainingSet`."""
    if isinstance(data, TrainingSet):
        return data
    X = check_matrix(data, "data", min_cols=2)
    return TrainingSet(X, list(range(X.shape[1])))
