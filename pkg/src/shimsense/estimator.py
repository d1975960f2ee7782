"""Scikit-learn style estimator tying decomposition, truncation, and sensing."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .basis import FeatureBasis, truncate_basis
from .exceptions import ConvergenceError, DataError
from .linalg import pivoted_qr
from .reconstruct import accuracy_within_tolerance, coefficient_solver
from .rpca import rpca
from .sensors import SensorSet, evaluate_objective, select_exact, select_oversampled


class GapPredictor(BaseEstimator):
    """Predict full gap fields from a few optimized point measurements.

    Follows the scikit-learn convention: rows of ``X`` are units (one
    assembled structure each) and columns are measurement locations, so the
    estimator composes with ``sklearn.base.clone``, ``get_params``, and
    friends. :meth:`fit` learns a robust low-rank feature basis from
    historical units and places sensors at the most informative locations;
    :meth:`predict` then maps gap values measured at those sensors for a new
    unit to the full field.

    Parameters
    ----------
    n_sensors : "auto", "rank", or int, default "auto"
        How many locations to instrument. "auto" oversamples to
        ``min(100, n_locations)``; "rank" uses exactly one sensor per basis
        mode. An integer below the learned rank is allowed but leaves the
        fit underdetermined (a warning is raised).
    rank : "auto" or int, default "auto"
        Number of basis modes. "auto" applies the optimal hard threshold to
        the singular value spectrum.
    lam, mu : float or "auto"
        Robust decomposition weights, see :func:`shimsense.rpca.rpca`.
    rpca_tol : float
        Relative feasibility tolerance for the decomposition.
    rpca_max_iter : int
        Decomposition iteration cap.
    center : bool, default False
        Remove the per-location mean before decomposing and restore it in
        predictions.
    tolerance : float, default 0.005
        Acceptance tolerance in inches used by :meth:`score`.
    sensor_method : {"logdet", "gram-qr"}
        Strategy for the oversampled pivots past the basis rank.
    require_convergence : bool, default True
        Raise when the decomposition hits its iteration cap instead of
        proceeding with the partial result.

    Attributes
    ----------
    basis_ : FeatureBasis
        The learned feature basis (modes are columns).
    components_ : ndarray of shape (rank_, n_features_in_)
        Basis modes as rows, mirroring the PCA convention.
    singular_values_ : ndarray
        Full spectrum of the low-rank training matrix.
    rank_ : int
    sensors_ : SensorSet
    sensor_indices_ : ndarray of int
        Feature (location) indices to measure, strongest first.
    mean_ : ndarray or None
        Per-location training mean when ``center=True``.
    rpca_n_iter_, rpca_converged_ : decomposition diagnostics.
    """

    def __init__(self, n_sensors="auto", rank="auto", lam="auto", mu="auto",
                 rpca_tol=1e-7, rpca_max_iter=500, center=False,
                 tolerance=0.005, sensor_method="logdet",
                 require_convergence=True):
        self.n_sensors = n_sensors
        self.rank = rank
        self.lam = lam
        self.mu = mu
        self.rpca_tol = rpca_tol
        self.rpca_max_iter = rpca_max_iter
        self.center = center
        self.tolerance = tolerance
        self.sensor_method = sensor_method
        self.require_convergence = require_convergence

    def fit(self, X, y=None):
        """Learn the feature basis and sensor locations from full fields."""
        X = check_array(X, dtype=np.float64)
        m, n = X.shape
        if m < 2:
            raise DataError("need at least two units to learn a basis")
        data = X.T
        mean = data.mean(axis=1) if self.center else None
        work = data - mean[:, None] if self.center else data

        result = rpca(work, lam=self.lam, mu=self.mu, tol=self.rpca_tol,
                      max_iter=self.rpca_max_iter)
        if not result.converged:
            msg = (
                f"robust decomposition stopped at iteration {result.n_iter} "
                f"with residual {result.residual_history[-1]:.3e} above "
                f"tolerance {self.rpca_tol:g}"
            )
            if self.require_convergence:
                raise ConvergenceError(msg, n_iter=result.n_iter,
                                       residual=result.residual_history[-1])
            warnings.warn(msg + "; continuing with the partial decomposition",
                          UserWarning)

        self.basis_ = truncate_basis(result.low_rank, rank=self.rank,
                                     location_mean=mean)
        self.sensors_ = self._place_sensors(self.basis_)
        self.sensor_indices_ = self.sensors_.indices
        self.components_ = self.basis_.modes.T
        self.singular_values_ = self.basis_.singular_values
        self.rank_ = self.basis_.rank
        self.mean_ = mean
        self.rpca_n_iter_ = result.n_iter
        self.rpca_converged_ = result.converged
        self.n_features_in_ = n
        return self

    def _place_sensors(self, basis: FeatureBasis) -> SensorSet:
        n, r = basis.n_locations, basis.rank
        if self.n_sensors == "auto":
            p = max(min(100, n), r)
        elif self.n_sensors == "rank":
            p = r
        else:
            p = int(self.n_sensors)
        if not 1 <= p <= n:
            raise DataError(f"n_sensors must be in [1, {n}], got {p}")
        if p > r:
            return select_oversampled(basis, p, method=self.sensor_method)
        if p == r:
            return select_exact(basis)
        warnings.warn(
            f"{p} sensors for a rank-{r} basis leaves predictions "
            "underdetermined",
            UserWarning,
        )
        indices = pivoted_qr(basis.modes.T, p).pivots
        logdet = evaluate_objective(basis, indices, "D").value
        return SensorSet(indices, "truncated", logdet)

    def predict(self, Y):
        """Predict full fields from measurements at ``sensor_indices_``.

        ``Y`` is either one measurement vector of length ``p`` or a stack of
        them with shape (n_units, p); the output matches, with full fields of
        length ``n_features_in_``.
        """
        check_is_fitted(self, "basis_")
        Y = check_array(Y, dtype=np.float64, ensure_2d=False)
        single = Y.ndim == 1
        Y = np.atleast_2d(Y)
        idx = self.sensor_indices_
        if Y.shape[1] != idx.size:
            raise DataError(
                f"measurements have {Y.shape[1]} values, expected {idx.size}"
            )
        solver = coefficient_solver(self.basis_, idx)
        values = Y.T
        if self.mean_ is not None:
            values = values - self.mean_[idx][:, None]
        coefficients = solver.solve_many(values)
        fields = (self.basis_.modes @ coefficients).T
        if self.mean_ is not None:
            fields = fields + self.mean_
        return fields[0] if single else fields

    def transform(self, X):
        """Project full fields onto the basis coefficients."""
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        work = X - self.mean_ if self.mean_ is not None else X
        return work @ self.basis_.modes

    def inverse_transform(self, coefficients):
        """Expand basis coefficients back to full fields."""
        check_is_fitted(self, "basis_")
        A = check_array(coefficients, dtype=np.float64, ensure_2d=False)
        single = A.ndim == 1
        A = np.atleast_2d(A)
        fields = A @ self.components_
        if self.mean_ is not None:
            fields = fields + self.mean_
        return fields[0] if single else fields

    def score(self, X, y=None):
        """Mean fraction of locations predicted within ``tolerance``.

        Each row of ``X`` is a full true field; it is sampled at the fitted
        sensors, predicted, and compared against itself.
        """
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=np.float64)
        predictions = self.predict(X[:, self.sensor_indices_])
        predictions = np.atleast_2d(predictions)
        accuracies = [
            accuracy_within_tolerance(X[i], predictions[i], self.tolerance)
            for i in range(X.shape[0])
        ]
        return float(np.mean(accuracies))
