"""Recover full gap fields from a few point measurements.

Fits basis coefficients to the measured values by least squares and expands
them back through the feature basis; includes tolerance-based accuracy and
error summaries for reporting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_indices, check_vector
from .basis import FeatureBasis
from .exceptions import ConditioningWarning
from .linalg import MinNormSolver


@dataclass(eq=False)
class Measurement:
    """Gap values (inches) observed at specific locations."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.ndim != 1:
            raise ValueError("indices must be 1-D")
        self.values = check_vector(self.values, "values",
                                   length=self.indices.size)


@dataclass(eq=False)
class Prediction:
    """Full predicted gap field plus the basis coefficients behind it.

    For an uncentered basis ``full_field == modes @ coefficients`` exactly by
    construction; a centered basis adds its stored location mean back in.
    """

    full_field: np.ndarray
    coefficients: np.ndarray


def coefficient_solver(basis: FeatureBasis, indices) -> MinNormSolver:
    """Least-squares solver for the basis rows at the given locations.

    Warns when the system is underdetermined (fewer measurements than modes)
    or rank deficient; in both cases downstream solves return the
    minimal-norm solution rather than failing.
    """
    indices = check_indices(indices, basis.n_locations, "measurement indices")
    if indices.size < basis.rank:
        warnings.warn(
            f"{indices.size} measurements for {basis.rank} basis modes; "
            "coefficients are the minimal-norm fit of an underdetermined "
            "system",
            ConditioningWarning,
        )
    solver = MinNormSolver(basis.modes[indices])
    if solver.rank < min(solver.shape):
        warnings.warn(
            "measurement rows are rank deficient (smallest singular value "
            f"{solver.sigma_min:.3e}); returning the minimal-norm solution",
            ConditioningWarning,
        )
    return solver


def estimate_coefficients(basis: FeatureBasis, measurement: Measurement):
    """Basis coefficients that best fit the measurements, in least squares."""
    solver = coefficient_solver(basis, measurement.indices)
    values = measurement.values
    if basis.location_mean is not None:
        values = values - basis.location_mean[measurement.indices]
    return solver.solve(values)


def predict_full(basis: FeatureBasis, measurement: Measurement) -> Prediction:
    """Predict the gap value at every location from point measurements.

    Measured locations are not overwritten with their observed values: the
    prediction is the basis expansion of the fitted coefficients everywhere,
    so a least-squares residual may remain at measured points in the
    oversampled case.
    """
    coefficients = estimate_coefficients(basis, measurement)
    field = basis.modes @ coefficients
    if basis.location_mean is not None:
        field = field + basis.location_mean
    return Prediction(field, coefficients)


def accuracy_within_tolerance(x_true, x_hat, tol=0.005):
    """Fraction of locations where the absolute error is strictly below ``tol``."""
    x_true = check_vector(x_true, "x_true")
    x_hat = check_vector(x_hat, "x_hat", length=x_true.size)
    if not tol > 0:
        raise ValueError("tol must be positive")
    return float(np.mean(np.abs(x_true - x_hat) < tol))


def log_bin_edges(lo=1e-8, hi=1.0, bins_per_decade=8):
    """Logarithmically spaced histogram edges covering ``[lo, hi]``."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    decades = np.log10(hi) - np.log10(lo)
    n_bins = max(int(round(decades * bins_per_decade)), 1)
    return np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)


@dataclass(eq=False)
class ErrorStats:
    """Pointwise absolute errors with summary statistics.

    The histogram counts every point: errors outside the bin range are
    clipped into the end bins so mass is conserved.
    """

    abs_errors: np.ndarray
    median: float
    quantiles: dict
    histogram: np.ndarray
    bin_edges: np.ndarray


def error_statistics(x_true, x_hat, quantiles=(0.25, 0.5, 0.75, 0.9, 0.99),
                     bin_edges=None) -> ErrorStats:
    """Per-location absolute errors plus median, quantiles, and a histogram.

    Bins default to the logarithmic edges of :func:`log_bin_edges`, matching
    the log-error axis used in the batch reports.
    """
    x_true = check_vector(x_true, "x_true")
    x_hat = check_vector(x_hat, "x_hat", length=x_true.size)
    errors = np.abs(x_true - x_hat)
    if bin_edges is None:
        bin_edges = log_bin_edges()
    else:
        bin_edges = check_vector(bin_edges, "bin_edges")
        if bin_edges.size < 2 or np.any(np.diff(bin_edges) <= 0):
            raise ValueError("bin_edges must be strictly increasing, length >= 2")
    clipped = np.clip(errors, bin_edges[0], bin_edges[-1])
    counts, _ = np.histogram(clipped, bins=bin_edges)
    return ErrorStats(
        abs_errors=errors,
        median=float(np.median(errors)),
        quantiles={float(q): float(np.quantile(errors, q)) for q in quantiles},
        histogram=counts,
        bin_edges=bin_edges,
    )
