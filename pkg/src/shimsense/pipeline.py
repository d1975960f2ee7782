"""Cross-validation harness: leave-one-out runs, segmentation, sensor sweeps.

Each fold trains on all units but one, places sensors, samples the held-out
unit at those locations, and scores the prediction against the truth. The
held-out column never touches decomposition, rank selection, or sensor
placement for its own fold. Folds are independent units of work executed
sequentially here so that every report is reproducible bit for bit from the
run seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from ._validation import check_matrix
from .basis import TrainingSet, as_training_set
from .estimator import GapPredictor
from .exceptions import DataError, ShimsenseError
from .reconstruct import Measurement, accuracy_within_tolerance, predict_full


@dataclass(eq=False)
class SegmentMap:
    """Assignment of every measurement location to exactly one segment."""

    assignments: np.ndarray

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments)
        if self.assignments.ndim != 1 or self.assignments.size < 1:
            raise DataError("assignments must be a non-empty 1-D sequence")

    @property
    def n_locations(self):
        return self.assignments.size

    @property
    def segments(self):
        """Sorted ``(label, location indices)`` pairs, each non-empty."""
        labels = sorted(set(self.assignments.tolist()), key=str)
        return [
            (label, np.nonzero(self.assignments == label)[0])
            for label in labels
        ]


@dataclass(eq=False)
class FoldReport:
    """Prediction outcome for one held-out unit."""

    held_out_unit: object
    rank: int
    n_sensors: int
    accuracy: float
    abs_errors: np.ndarray
    sensor_indices: np.ndarray
    baseline_accuracies: np.ndarray
    failed: bool = False
    message: str = ""

    def to_dict(self):
        record = {
            "unit": self.held_out_unit,
            "failed": self.failed,
        }
        if self.failed:
            record["message"] = self.message
            return record
        record.update(
            rank=int(self.rank),
            n_sensors=int(self.n_sensors),
            accuracy=float(self.accuracy),
            sensor_indices=[int(i) for i in self.sensor_indices],
        )
        if self.baseline_accuracies.size:
            record["baseline_mean_accuracy"] = float(
                np.mean(self.baseline_accuracies)
            )
        return record


@dataclass(eq=False)
class RunReport:
    """Aggregate of a leave-one-out run.

    Pooled quantities stack exactly one held-out column per fold, so the
    pooled point count is ``n_locations`` times the number of successful
    folds. ``sensor_counts[i]`` is the number of folds that placed a sensor
    at location ``i``.
    """

    folds: list
    tolerance: float
    seed: int
    n_locations: int
    n_units: int
    overall_accuracy: float
    pooled_abs_errors: np.ndarray
    per_location_median_error: np.ndarray
    sensor_counts: np.ndarray
    baseline_pooled_abs_errors: np.ndarray | None = None
    baseline_overall_accuracy: float | None = None

    def to_dict(self):
        """JSON-ready summary (raw pooled arrays are summarized, not dumped)."""
        return {
            "tolerance": float(self.tolerance),
            "seed": int(self.seed),
            "n_locations": int(self.n_locations),
            "n_units": int(self.n_units),
            "n_failed_folds": sum(1 for f in self.folds if f.failed),
            "pooled_points": int(self.pooled_abs_errors.size),
            "overall_accuracy": _json_float(self.overall_accuracy),
            "baseline_overall_accuracy": _json_float(
                self.baseline_overall_accuracy
            ),
            "folds": [f.to_dict() for f in self.folds],
        }


def _json_float(value):
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None


def loo_crossval(data, predictor=None, *, tolerance=None, baseline_trials=50,
                 seed=0) -> RunReport:
    """Leave-one-out cross-validation over every unit.

    Parameters
    ----------
    data : TrainingSet or array of shape (n_locations, n_units)
    predictor : GapPredictor, optional
        Prototype estimator, cloned for each fold. Defaults to
        ``GapPredictor()``.
    tolerance : float, optional
        Accuracy tolerance in inches; defaults to the predictor's.
    baseline_trials : int
        Random sensor sets evaluated per fold for the optimized-vs-random
        comparison. 0 disables the baseline.
    seed : int
        Root seed for all baseline randomness. Fold seeds are spawned from
        it, so reports are byte-identical across runs.

    A fold whose training fails (for example, non-convergence) is marked
    failed and the run continues; failures are surfaced in the report.
    """
    ts = as_training_set(data)
    if predictor is None:
        predictor = GapPredictor()
    if tolerance is None:
        tolerance = predictor.tolerance
    baseline_trials = int(baseline_trials)
    X = ts.X
    n, m = X.shape
    if m < 3:
        raise DataError("leave-one-out needs at least three units")

    fold_seeds = np.random.SeedSequence(seed).spawn(m)
    folds = []
    for k in range(m):
        rng = np.random.default_rng(fold_seeds[k])
        truth = X[:, k]
        try:
            est = clone(predictor).fit(np.delete(X, k, axis=1).T)
            indices = est.sensor_indices_
            predicted = est.predict(truth[indices])
            errors = np.abs(predicted - truth)
            accuracy = accuracy_within_tolerance(truth, predicted, tolerance)
            baseline = np.empty(baseline_trials)
            baseline_errors = []
            for t in range(baseline_trials):
                random_idx = rng.choice(n, size=indices.size, replace=False)
                trial = predict_full(
                    est.basis_, Measurement(random_idx, truth[random_idx])
                )
                err = np.abs(trial.full_field - truth)
                baseline[t] = float(np.mean(err < tolerance))
                baseline_errors.append(err)
            folds.append(FoldReport(
                held_out_unit=ts.unit_ids[k],
                rank=est.rank_,
                n_sensors=int(indices.size),
                accuracy=accuracy,
                abs_errors=errors,
                sensor_indices=indices,
                baseline_accuracies=baseline,
            ))
            folds[-1]._baseline_errors = baseline_errors
        except (ShimsenseError, np.linalg.LinAlgError) as exc:
            folds.append(FoldReport(
                held_out_unit=ts.unit_ids[k],
                rank=0, n_sensors=0, accuracy=float("nan"),
                abs_errors=np.empty(0), sensor_indices=np.empty(0, np.int64),
                baseline_accuracies=np.empty(0),
                failed=True, message=str(exc),
            ))
    return _aggregate(folds, ts, tolerance, seed, baseline_trials)


def _aggregate(folds, ts, tolerance, seed, baseline_trials):
    n = ts.n_locations
    ok = [f for f in folds if not f.failed]
    if ok:
        pooled = np.concatenate([f.abs_errors for f in ok])
        overall = float(np.mean(pooled < tolerance))
        median = np.median(np.column_stack([f.abs_errors for f in ok]), axis=1)
        counts = np.bincount(
            np.concatenate([f.sensor_indices for f in ok]), minlength=n
        )
    else:
        pooled = np.empty(0)
        overall = float("nan")
        median = np.full(n, np.nan)
        counts = np.zeros(n, dtype=np.int64)
    baseline_pooled = None
    baseline_overall = None
    if baseline_trials > 0 and ok:
        baseline_pooled = np.concatenate(
            [e for f in ok for e in f._baseline_errors]
        )
        baseline_overall = float(np.mean(baseline_pooled < tolerance))
    for f in ok:
        if hasattr(f, "_baseline_errors"):
            del f._baseline_errors
    return RunReport(
        folds=folds,
        tolerance=tolerance,
        seed=seed,
        n_locations=n,
        n_units=ts.n_units,
        overall_accuracy=overall,
        pooled_abs_errors=pooled,
        per_location_median_error=median,
        sensor_counts=counts,
        baseline_pooled_abs_errors=baseline_pooled,
        baseline_overall_accuracy=baseline_overall,
    )


@dataclass(eq=False)
class SegmentSummary:
    """One row of the per-segment results table."""

    segment: object
    percent_accurate: float
    avg_sensors: float
    total_points: int


@dataclass(eq=False)
class SegmentedReport:
    """Independent cross-validation reports per segment plus a summary table."""

    per_segment: dict
    summary: list

    @property
    def overall_accuracy(self):
        """Accuracy pooled across every segment's validation points."""
        pooled = np.concatenate([
            rep.pooled_abs_errors < rep.tolerance
            for rep in self.per_segment.values()
            if rep.pooled_abs_errors.size
        ])
        return float(np.mean(pooled)) if pooled.size else float("nan")

    def to_dict(self):
        return {
            "overall_accuracy": _json_float(self.overall_accuracy),
            "summary": [
                {
                    "segment": str(row.segment),
                    "percent_accurate": _json_float(row.percent_accurate),
                    "avg_sensors": _json_float(row.avg_sensors),
                    "total_points": int(row.total_points),
                }
                for row in self.summary
            ],
            "segments": {
                str(label): rep.to_dict()
                for label, rep in self.per_segment.items()
            },
        }


def segment_crossval(data, segment_map, predictor=None, *, tolerance=None,
                     baseline_trials=50, seed=0) -> SegmentedReport:
    """Run the full cross-validation independently on each segment.

    With a single segment covering every location this reduces exactly to
    :func:`loo_crossval`. Each segment trains its own basis and sensors, so
    tightly correlated sub-structures are modeled separately.
    """
    ts = as_training_set(data)
    if not isinstance(segment_map, SegmentMap):
        segment_map = SegmentMap(segment_map)
    if segment_map.n_locations != ts.n_locations:
        raise DataError(
            f"segment map covers {segment_map.n_locations} locations, data "
            f"has {ts.n_locations}"
        )
    per_segment = {}
    summary = []
    for label, idx in segment_map.segments:
        sub = TrainingSet(ts.X[idx], ts.unit_ids)
        report = loo_crossval(sub, predictor, tolerance=tolerance,
                              baseline_trials=baseline_trials, seed=seed)
        per_segment[label] = report
        ok = [f for f in report.folds if not f.failed]
        summary.append(SegmentSummary(
            segment=label,
            percent_accurate=100.0 * report.overall_accuracy,
            avg_sensors=float(np.mean([f.n_sensors for f in ok]))
            if ok else float("nan"),
            total_points=int(idx.size),
        ))
    return SegmentedReport(per_segment, summary)


@dataclass(eq=False)
class SweepPoint:
    """Cross-validation outcome for one sensor count."""

    p: int
    overall_accuracy: float
    error_quantiles: dict
    underdetermined_units: list
    report: RunReport = field(repr=False, default=None)


def sensor_sweep(data, p_values, predictor=None, *, tolerance=None,
                 seed=0) -> list:
    """Cross-validate at each sensor count and summarize the error spread.

    Folds whose learned rank exceeds ``p`` are flagged underdetermined for
    that point rather than dropped.
    """
    ts = as_training_set(data)
    if predictor is None:
        predictor = GapPredictor()
    points = []
    for p in p_values:
        p = int(p)
        est = clone(predictor).set_params(n_sensors=p)
        report = loo_crossval(ts, est, tolerance=tolerance,
                              baseline_trials=0, seed=seed)
        pooled = report.pooled_abs_errors
        quantiles = {
            q: float(np.quantile(pooled, q)) if pooled.size else float("nan")
            for q in (0.25, 0.5, 0.75, 0.9, 0.99)
        }
        quantiles["max"] = float(pooled.max()) if pooled.size else float("nan")
        points.append(SweepPoint(
            p=p,
            overall_accuracy=report.overall_accuracy,
            error_quantiles=quantiles,
            underdetermined_units=[
                f.held_out_unit for f in report.folds
                if not f.failed and f.rank > p
            ],
            report=report,
        ))
    return points
