"""Dense linear-algebra kernels: SVD, greedy pivoted QR, minimal-norm least squares.

Matrices are float64 numpy arrays addressed as ``A[row, col]``; indices are
0-based everywhere. All functions are pure, so independent factorizations may
run concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_vector
from .exceptions import ConvergenceError, RankDeficiencyWarning

# Relative tolerance for treating two candidate pivot norms as tied.
TIE_RTOL = 1e-12

# Residual column norms below this are treated as numerically zero.
RANK_TOL = 1e-12


@dataclass(eq=False)
class SvdResult:
    """Economy-size singular value decomposition ``A = U @ diag(s) @ Vt``.

    ``U`` and ``Vt.T`` have orthonormal columns and ``s`` is sorted in
    non-increasing order.
    """

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray


@dataclass(eq=False)
class PivotedQr:
    """Outcome of greedy column-pivoted QR.

    Attributes
    ----------
    pivots : ndarray of int
        Selected column indices of the input, strongest first.
    r_diagonal : ndarray
        Signed diagonal entries of ``R``, one per pivot. Their magnitudes are
        non-increasing.
    permutation : ndarray of int
        Full column order: the pivots followed by the unselected columns in
        their final working order.
    rank_deficient : bool
        True when every residual column norm fell below the rank tolerance
        before the requested number of pivots was found.
    Q, R : ndarray or None
        Factors satisfying ``A[:, pivots] == Q @ R[:, :len(pivots)]`` (and
        ``A[:, permutation] == Q @ R`` when the factorization is complete).
        Only populated when requested.
    """

    pivots: np.ndarray
    r_diagonal: np.ndarray
    permutation: np.ndarray
    rank_deficient: bool
    Q: np.ndarray | None = None
    R: np.ndarray | None = None


def _argmax_tied(values, keys):
    """Index of the largest value; ties within TIE_RTOL go to the lowest key."""
    mx = values.max()
    if not np.isfinite(mx):
        raise ValueError("no finite candidate values")
    threshold = mx - TIE_RTOL * abs(mx)
    candidates = np.nonzero(values >= threshold)[0]
    return int(candidates[np.argmin(keys[candidates])])


def svd(A) -> SvdResult:
    """Economy-size SVD of a dense matrix.

    Raises
    ------
    ConvergenceError
        If the underlying iterative eigensolver fails to converge. A failure
        is always reported explicitly; no partial factors are returned.
    """
    A = check_matrix(A, "A")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            "SVD did not converge: LAPACK stopped at its internal QR-iteration "
            f"limit ({exc})"
        ) from exc
    return SvdResult(U, s, Vt)


def pivoted_qr(A, p=None, *, want_qr=False, rank_tol=RANK_TOL,
               on_deficient="stop") -> PivotedQr:
    """QR factorization with greedy column pivoting.

    At each step the remaining column with the largest residual 2-norm is
    selected (ties broken toward the lowest original column index), then a
    Householder reflection removes its direction from every remaining column.

    Parameters
    ----------
    A : array_like, shape (m, n)
    p : int, optional
        Number of pivots to select. Defaults to ``min(m, n)``. Values above
        the row count are allowed but warn, since the extra pivots are
        necessarily rank deficient.
    want_qr : bool
        Also return the ``Q`` and ``R`` factors.
    rank_tol : float
        Absolute residual-norm threshold below which columns count as zero.
    on_deficient : {"stop", "continue"}
        What to do when all residual norms drop below ``rank_tol`` before
        ``p`` pivots are found: stop with the pivots found so far (default),
        or keep selecting columns so that exactly ``p`` distinct indices are
        returned. Either way the result is flagged ``rank_deficient``.
    """
    A = check_matrix(A, "A")
    m, n = A.shape
    if p is None:
        p = min(m, n)
    p = int(p)
    if not 1 <= p <= n:
        raise ValueError(f"p must be in [1, {n}], got {p}")
    if p > m:
        warnings.warn(
            f"requested {p} pivots from a matrix with only {m} rows; pivots "
            "beyond the row count are rank deficient",
            RankDeficiencyWarning,
        )
    if on_deficient not in ("stop", "continue"):
        raise ValueError("on_deficient must be 'stop' or 'continue'")

    R = A.copy()
    perm = np.arange(n)
    reflectors = []
    diag = []
    deficient = False
    n_found = 0

    for k in range(p):
        block = R[k:, k:]
        if block.shape[0]:
            norms = np.sqrt(np.einsum("ij,ij->j", block, block))
            mx = float(norms.max())
        else:
            norms = np.zeros(n - k)
            mx = 0.0
        if mx < rank_tol:
            deficient = True
            if on_deficient == "stop":
                break
        if mx > 0.0:
            j_rel = _argmax_tied(norms, perm[k:])
        else:
            j_rel = int(np.argmin(perm[k:]))
        j = k + j_rel
        if j != k:
            R[:, [k, j]] = R[:, [j, k]]
            perm[[k, j]] = perm[[j, k]]

        if k < m:
            x = R[k:, k]
            normx = float(np.linalg.norm(x))
            if normx > 0.0:
                alpha = -normx if x[0] >= 0 else normx
                v = x.copy()
                v[0] -= alpha
                beta = 2.0 / float(v @ v)
                R[k:, k:] -= np.outer(v, beta * (v @ R[k:, k:]))
                R[k, k] = alpha
                R[k + 1:, k] = 0.0
                if want_qr:
                    reflectors.append((k, v))
                diag.append(alpha)
            else:
                diag.append(0.0)
        else:
            diag.append(0.0)
        n_found += 1

    result = PivotedQr(
        pivots=perm[:n_found].copy(),
        r_diagonal=np.asarray(diag),
        permutation=perm,
        rank_deficient=deficient,
    )
    if want_qr:
        rows = min(n_found, m)
        Q = np.eye(m)
        for k, v in reversed(reflectors):
            beta = 2.0 / float(v @ v)
            Q[k:, :] -= np.outer(v, beta * (v @ Q[k:, :]))
        result.Q = Q[:, :rows]
        result.R = R[:rows, :]
    return result


class MinNormSolver:
    """Reusable minimal-norm least-squares solver built on the SVD.

    Singular values below ``max(rows, cols) * sigma_max * eps`` (with an
    absolute floor of 1e-12) are treated as zero, so rank-deficient systems
    return the unique minimal-norm solution instead of blowing up.
    """

    def __init__(self, A):
        A = check_matrix(A, "A")
        dec = svd(A)
        self.shape = A.shape
        self.s = dec.s
        sigma_max = float(dec.s[0]) if dec.s.size else 0.0
        self.cutoff = max(max(A.shape) * np.finfo(np.float64).eps * sigma_max,
                          1e-12)
        keep = dec.s > self.cutoff
        self.rank = int(np.count_nonzero(keep))
        self._U = dec.U[:, keep]
        self._V = dec.Vt[keep].T
        self._inv_s = 1.0 / dec.s[keep] if self.rank else np.empty(0)

    @property
    def sigma_min(self):
        """Smallest singular value of the system matrix (kept or not)."""
        return float(self.s[-1]) if self.s.size else 0.0

    def solve(self, b):
        b = check_vector(b, "b", length=self.shape[0])
        if not self.rank:
            return np.zeros(self.shape[1])
        return self._V @ ((self._U.T @ b) * self._inv_s)

    def solve_many(self, B):
        """Solve for every column of ``B`` at once; returns one column each."""
        B = check_matrix(B, "B", min_cols=1)
        if B.shape[0] != self.shape[0]:
            raise ValueError(
                f"B has {B.shape[0]} rows, expected {self.shape[0]}"
            )
        if not self.rank:
            return np.zeros((self.shape[1], B.shape[1]))
        return self._V @ ((self._U.T @ B) * self._inv_s[:, None])


def least_squares_minnorm(A, b) -> np.ndarray:
    """Minimal-norm solution of ``min ||A x - b||_2``.

    Among all least-squares minimizers, returns the one with the smallest
    2-norm (the pseudoinverse solution).
    """
    return MinNormSolver(A).solve(b)
