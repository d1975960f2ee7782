"""Point-sensor placement on a feature basis.

Greedy determinant-optimal selection via QR column pivoting, with an
oversampled mode for more sensors than basis modes, a seeded random baseline,
and evaluators for the determinant / worst-case / mean-square design criteria.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_indices
from .basis import FeatureBasis
from .exceptions import RankDeficiencyWarning
from .linalg import _argmax_tied, pivoted_qr, svd


@dataclass(eq=False)
class SensorSet:
    """Ordered measurement locations chosen for a basis.

    ``mode`` records how the set was produced: "exact" (one sensor per basis
    mode), "oversampled" (more sensors than modes), "truncated" (fewer, an
    underdetermined prefix of the exact selection), or "random".
    ``objective_logdet`` is the log-determinant objective at selection time,
    ``nan`` for random sets built without a basis.
    """

    indices: np.ndarray
    mode: str
    objective_logdet: float

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)

    @property
    def p(self):
        return int(self.indices.size)


@dataclass(eq=False)
class ObjectiveReport:
    """Design-criterion value plus the spectrum it was computed from.

    ``eigenvalues`` are those of the selected-rows normal matrix, in
    non-increasing order, zero-padded when fewer sensors than modes.
    """

    criterion: str
    value: float
    eigenvalues: np.ndarray


def _normal_matrix_eigenvalues(basis, indices):
    theta = basis.modes[indices]
    s = svd(theta).s
    eig = np.zeros(basis.rank)
    eig[: s.size] = s**2
    sigma_max = float(s[0]) if s.size else 0.0
    cutoff = max(theta.shape) * np.finfo(np.float64).eps * sigma_max
    singular = bool(eig.min() <= cutoff)
    return eig, singular


def evaluate_objective(basis, sensors, criterion="D") -> ObjectiveReport:
    """Evaluate a design criterion for a sensor choice on a basis.

    Criteria (all on the normal matrix of the selected basis rows):
    "D" is the log determinant, "E" the smallest eigenvalue, and "A" the sum
    of inverse eigenvalues. A singular normal matrix is reported through
    sentinels (-inf, 0, +inf respectively), never raised: objective
    evaluation is a diagnostic, not a control path.
    """
    if criterion not in ("D", "E", "A"):
        raise ValueError(f"criterion must be 'D', 'E', or 'A', got {criterion!r}")
    indices = sensors.indices if isinstance(sensors, SensorSet) else sensors
    indices = check_indices(indices, basis.n_locations, "sensor indices")
    eig, singular = _normal_matrix_eigenvalues(basis, indices)
    if criterion == "D":
        value = -np.inf if singular else float(np.sum(np.log(eig)))
    elif criterion == "E":
        value = 0.0 if singular else float(eig.min())
    else:
        value = np.inf if singular else float(np.sum(1.0 / eig))
    return ObjectiveReport(criterion, value, eig)


def _logdet(basis, indices):
    return evaluate_objective(basis, indices, "D").value


def select_exact(basis: FeatureBasis) -> SensorSet:
    """One sensor per basis mode via greedy pivoted QR on the mode rows.

    The pivots make the selected rows as close to orthogonal as possible,
    which greedily maximizes the determinant objective. Rank deficiency (a
    degenerate basis) warns and returns the pivots found so far.
    """
    result = pivoted_qr(basis.modes.T, basis.rank)
    if result.rank_deficient:
        warnings.warn(
            f"basis rows ran out of rank after {result.pivots.size} of "
            f"{basis.rank} sensors",
            RankDeficiencyWarning,
        )
    indices = result.pivots
    return SensorSet(indices, "exact", _logdet(basis, indices))


def select_oversampled(basis: FeatureBasis, p, method="logdet") -> SensorSet:
    """Choose ``p`` sensors for a rank-r basis with ``p > r``.

    The selection is hierarchical: the first r indices coincide with the
    exact selection, and for ``p1 < p2`` the ``p1`` selection is a prefix of
    the ``p2`` one.

    ``method="logdet"`` (default) continues past the first r pivots by
    greedily maximizing the determinant gain of each added row.
    ``method="gram-qr"`` instead takes the first ``p`` pivots of a pivoted QR
    of the modes' outer-product matrix; past rank r that matrix is exactly
    rank deficient, so those extra pivots are roundoff-driven. The gram-qr
    route is kept for reference but does not reach competitive objective
    values past r, which is why it is not the default.
    """
    p = int(p)
    r, n = basis.rank, basis.n_locations
    if p <= r:
        raise ValueError(
            f"oversampled selection needs p > rank ({r}); use select_exact "
            "for p == rank"
        )
    if p > n:
        raise ValueError(f"cannot place {p} sensors on {n} locations")
    if method == "gram-qr":
        gram = basis.modes @ basis.modes.T
        indices = pivoted_qr(gram, p, on_deficient="continue").pivots
    elif method == "logdet":
        indices = _greedy_logdet_indices(basis.modes, p)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SensorSet(indices, "oversampled", _logdet(basis, indices))


def _greedy_logdet_indices(modes, p):
    n, r = modes.shape
    start = pivoted_qr(modes.T, r).pivots
    order = list(start)
    selected = np.zeros(n, dtype=bool)
    selected[start] = True
    M = modes[start].T @ modes[start]
    keys = np.arange(n)
    for _ in range(p - len(order)):
        try:
            Z = np.linalg.solve(M, modes.T)
        except np.linalg.LinAlgError:
            Z = np.linalg.pinv(M, hermitian=True) @ modes.T
        gain = np.einsum("ij,ji->i", modes, Z)
        gain[selected] = -np.inf
        j = _argmax_tied(gain, keys)
        order.append(j)
        selected[j] = True
        M += np.outer(modes[j], modes[j])
    return np.asarray(order, dtype=np.int64)


def select_random(n, p, seed) -> SensorSet:
    """``p`` distinct locations drawn uniformly, reproducible from ``seed``.

    Uses the PCG64 generator, so the same seed gives the same set on every
    platform.
    """
    n, p = int(n), int(p)
    if not 1 <= p <= n:
        raise ValueError(f"p must be in [1, {n}], got {p}")
    rng = np.random.default_rng(seed)
    indices = rng.choice(n, size=p, replace=False).astype(np.int64)
    return SensorSet(indices, "random", float("nan"))
