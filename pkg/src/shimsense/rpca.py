"""Robust principal component analysis by principal component pursuit.

Splits a data matrix into a low-rank part plus a sparse outlier part by
minimizing ``||L||_* + lambda * ||S||_1`` subject to ``L + S = X``, solved
with the inexact augmented-Lagrangian / alternating-directions iteration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from ._validation import check_matrix
from .exceptions import ConvergenceError
from .linalg import svd


def shrink(x, tau):
    """Soft threshold ``sign(x) * max(|x| - tau, 0)``, applied elementwise."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return float(out) if out.ndim == 0 else out


def svt(X, tau):
    """Singular value thresholding: the soft threshold applied to the spectrum.

    Returns ``U @ diag(shrink(s, tau)) @ Vt`` for the economy SVD of ``X``;
    this is the proximal operator of the nuclear norm.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    dec = svd(X)
    return (dec.U * shrink(dec.s, tau)) @ dec.Vt


def default_lambda(n, m):
    """Sparsity weight ``1 / sqrt(max(n, m))`` for an ``n x m`` matrix."""
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise ValueError("matrix dimensions must be positive")
    return 1.0 / math.sqrt(max(n, m))


@dataclass(eq=False)
class RpcaResult:
    """Low-rank plus sparse split with solver diagnostics.

    ``low_rank + sparse`` reproduces the input to within the requested
    relative Frobenius tolerance whenever ``converged`` is True.
    """

    low_rank: np.ndarray
    sparse: np.ndarray
    multiplier: np.ndarray
    n_iter: int
    converged: bool
    residual_history: list = field(default_factory=list)


def rpca(X, lam="auto", mu="auto", tol=1e-7, max_iter=500) -> RpcaResult:
    """Decompose ``X`` into low-rank plus sparse parts.

    Each iteration performs, in order: a singular-value-threshold update of
    the low-rank part, a soft-threshold update of the sparse part, and a
    gradient-ascent update of the Lagrange multiplier. Iteration stops when
    the relative feasibility residual ``||X - L - S||_F / ||X||_F`` falls
    below ``tol`` or after ``max_iter`` iterations; the ``converged`` flag
    reports which happened.

    Parameters
    ----------
    X : array_like
        Data matrix, all entries finite.
    lam : float or "auto"
        Sparsity weight. "auto" uses ``1 / sqrt(max(n, m))``.
    mu : float or "auto"
        Penalty parameter, held constant across iterations. "auto" uses
        ``n * m / (4 * sum(|X|))``.
    tol : float
        Relative Frobenius feasibility tolerance, in ``(0, 1)``.
    max_iter : int
        Iteration cap; reaching it returns the partial result with
        ``converged=False`` and is not an exception.
    """
    X = check_matrix(X, "X")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    max_iter = int(max_iter)
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    n, m = X.shape

    norm_x = float(np.linalg.norm(X))
    if norm_x == 0.0:
        zero = np.zeros_like(X)
        return RpcaResult(zero, zero.copy(), zero.copy(), 0, True, [0.0])

    if lam == "auto":
        lam = default_lambda(n, m)
    elif not lam > 0:
        raise ValueError("lam must be positive")
    if mu == "auto":
        mu = (n * m) / (4.0 * float(np.abs(X).sum()))
    elif not mu > 0:
        raise ValueError("mu must be positive")

    L = np.zeros_like(X)
    S = np.zeros_like(X)
    Y = np.zeros_like(X)
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        L = svt(X - S + Y / mu, 1.0 / mu)
        S = shrink(X - L + Y / mu, lam / mu)
        gap = X - L - S
        Y += mu * gap
        residual = float(np.linalg.norm(gap)) / norm_x
        history.append(residual)
        if residual <= tol:
            converged = True
            break
    return RpcaResult(L, S, Y, it, converged, history)


class RobustPCA(BaseEstimator):
    """Scikit-learn style front end for the low-rank plus sparse split.

    The decomposition is transductive: it factors the matrix passed to
    :meth:`fit` rather than learning a map that applies to new data, so use
    :meth:`fit_transform` to obtain the cleaned (low-rank) matrix.

    Parameters
    ----------
    lam : float or "auto"
        Sparsity weight.
    mu : float or "auto"
        Constant penalty parameter.
    tol : float
        Relative feasibility tolerance.
    max_iter : int
        Iteration cap.

    Attributes
    ----------
    low_rank_ : ndarray
        Low-rank component of the fitted matrix.
    sparse_ : ndarray
        Sparse outlier component.
    multiplier_ : ndarray
        Lagrange multiplier at exit.
    n_iter_ : int
    converged_ : bool
    residual_history_ : list of float
    """

    def __init__(self, lam="auto", mu="auto", tol=1e-7, max_iter=500):
        self.lam = lam
        self.mu = mu
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        result = rpca(X, lam=self.lam, mu=self.mu, tol=self.tol,
                      max_iter=self.max_iter)
        if not result.converged:
            warnings.warn(
                f"decomposition stopped after {result.n_iter} iterations with "
                f"residual {result.residual_history[-1]:.3e} above tolerance "
                f"{self.tol:g}",
                UserWarning,
            )
        self.low_rank_ = result.low_rank
        self.sparse_ = result.sparse
        self.multiplier_ = result.multiplier
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        self.residual_history_ = result.residual_history
        self.n_features_in_ = X.shape[1]
        return self

    def fit_transform(self, X, y=None):
        """Fit the decomposition and return the low-rank component."""
        return self.fit(X).low_rank_
