"""File formats, run configuration, and report serialization.

Everything is UTF-8 text for auditability: matrices carry a
``# rows=<n> cols=<m>`` header followed by comma-separated rows written at
full precision (they round trip exactly), sensor lists carry an explicit
``# index_base=0`` header, and reports are JSON plus CSV tables ready for
plotting. Configuration is strict JSON: unknown keys are rejected up front.
"""

from __future__ import annotations

import copy
import json
import re
from pathlib import Path

import numpy as np

from ._validation import check_matrix
from .basis import FeatureBasis
from .datagen import SynthSpec
from .estimator import GapPredictor
from .exceptions import ConfigError, DataError
from .pipeline import RunReport, SegmentedReport, SegmentMap
from .reconstruct import Measurement, log_bin_edges
from .sensors import SensorSet

_MATRIX_HEADER = re.compile(r"^# rows=(\d+) cols=(\d+)$")
_INDEX_HEADER = "# index_base=0"


# ---------------------------------------------------------------------------
# matrix files

def write_matrix(path, A):
    """Write a matrix file; values keep full precision and round trip exactly."""
    A = check_matrix(A, "matrix")
    rows, cols = A.shape
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# rows={rows} cols={cols}\n")
        for row in A:
            handle.write(",".join("%.17g" % v for v in row))
            handle.write("\n")


def read_matrix(path):
    """Read a matrix file, validating the declared shape against the body."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        match = _MATRIX_HEADER.match(header)
        if not match:
            raise DataError(
                f"{path}: first line must be '# rows=<n> cols=<m>', got "
                f"{header!r}"
            )
        rows, cols = int(match.group(1)), int(match.group(2))
        body = []
        for line_no, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != cols:
                raise DataError(
                    f"{path}:{line_no}: expected {cols} values, got {len(parts)}"
                )
            try:
                body.append([float(v) for v in parts])
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from exc
    if len(body) != rows:
        raise DataError(
            f"{path}: header declares {rows} rows, body has {len(body)}"
        )
    A = np.asarray(body, dtype=np.float64)
    if A.size and not np.all(np.isfinite(A)):
        raise DataError(f"{path}: matrix contains non-finite entries")
    return A


def write_vector(path, x):
    """Write a vector as a one-column matrix file."""
    write_matrix(path, np.asarray(x, dtype=np.float64).reshape(-1, 1))


def read_vector(path):
    A = read_matrix(path)
    if 1 not in A.shape:
        raise DataError(f"{path}: expected a one-row or one-column matrix")
    return A.ravel()


# ---------------------------------------------------------------------------
# index lists, measurements, segment maps

def write_sensor_indices(path, indices):
    indices = np.asarray(indices, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(_INDEX_HEADER + "\n")
        for i in indices:
            handle.write(f"{int(i)}\n")


def read_sensor_indices(path):
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != _INDEX_HEADER:
            raise DataError(
                f"{path}: first line must be {_INDEX_HEADER!r}, got {header!r}"
            )
        indices = []
        for line_no, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                indices.append(int(line))
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from exc
    return np.asarray(indices, dtype=np.int64)


def read_measurements(path):
    """Read ``index,value`` lines into a :class:`Measurement`."""
    path = Path(path)
    indices, values = [], []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(
                    f"{path}:{line_no}: expected 'index,value', got {line!r}"
                )
            try:
                indices.append(int(parts[0]))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from exc
    if not indices:
        raise DataError(f"{path}: no measurements found")
    return Measurement(np.asarray(indices, dtype=np.int64),
                       np.asarray(values))


def write_measurements(path, measurement):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(_INDEX_HEADER + "\n")
        for i, v in zip(measurement.indices, measurement.values):
            handle.write("%d,%.17g\n" % (i, v))


def read_segment_map(path):
    """Read a segment map: one segment label per location, one per line."""
    path = Path(path)
    labels = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            labels.append(line)
    if not labels:
        raise DataError(f"{path}: no segment labels found")
    return SegmentMap(np.asarray(labels, dtype=object))


# ---------------------------------------------------------------------------
# run configuration

DEFAULT_CONFIG = {
    "rpca": {
        "lambda": "auto",
        "mu": "auto",
        "tolerance": 1e-7,
        "max_iterations": 500,
    },
    "sensors": {
        "mode": "oversampled",
        "p": "auto",
    },
    "prediction": {
        "tolerance_inches": 0.005,
    },
    "crossval": {
        "baseline_trials": 50,
        "seed": 0,
    },
    "segmentation": "none",
}


def _check_auto_or_positive(value, key):
    if value == "auto":
        return
    if not isinstance(value, (int, float)) or isinstance(value, bool) \
            or not value > 0:
        raise ConfigError(f"{key} must be 'auto' or a positive number")


def _validate_config(cfg):
    known_sections = set(DEFAULT_CONFIG)
    for key in cfg:
        if key not in known_sections:
            raise ConfigError(f"unknown key {key!r}")
    for section in ("rpca", "sensors", "prediction", "crossval"):
        block = cfg[section]
        if not isinstance(block, dict):
            raise ConfigError(f"{section} must be a mapping")
        for key in block:
            if key not in DEFAULT_CONFIG[section]:
                raise ConfigError(f"unknown key {section}.{key!r}")
    rp = cfg["rpca"]
    _check_auto_or_positive(rp["lambda"], "rpca.lambda")
    _check_auto_or_positive(rp["mu"], "rpca.mu")
    if not isinstance(rp["tolerance"], float) or not 0 < rp["tolerance"] < 1:
        raise ConfigError("rpca.tolerance must be a float in (0, 1)")
    if not isinstance(rp["max_iterations"], int) \
            or isinstance(rp["max_iterations"], bool) \
            or rp["max_iterations"] < 1:
        raise ConfigError("rpca.max_iterations must be a positive integer")
    sn = cfg["sensors"]
    if sn["mode"] not in ("exact", "oversampled"):
        raise ConfigError("sensors.mode must be 'exact' or 'oversampled'")
    if sn["p"] != "auto" and (not isinstance(sn["p"], int)
                              or isinstance(sn["p"], bool) or sn["p"] < 1):
        raise ConfigError("sensors.p must be 'auto' or a positive integer")
    pred = cfg["prediction"]
    if not isinstance(pred["tolerance_inches"], (int, float)) \
            or isinstance(pred["tolerance_inches"], bool) \
            or not pred["tolerance_inches"] > 0:
        raise ConfigError("prediction.tolerance_inches must be positive")
    cv = cfg["crossval"]
    if not isinstance(cv["baseline_trials"], int) \
            or isinstance(cv["baseline_trials"], bool) \
            or cv["baseline_trials"] < 0:
        raise ConfigError("crossval.baseline_trials must be a non-negative "
                          "integer")
    if not isinstance(cv["seed"], int) or isinstance(cv["seed"], bool):
        raise ConfigError("crossval.seed must be an integer")
    if not isinstance(cfg["segmentation"], str):
        raise ConfigError("segmentation must be a path string or 'none'")


def load_config(path=None):
    """Load a run configuration, merging defaults for any omitted keys."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                user = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path} must contain a JSON object")
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    _validate_config(cfg)
    return cfg


_SYNTH_KEYS = {
    "n_locations", "n_units", "rank", "coeff_scale", "outlier_fraction",
    "outlier_magnitude", "noise_sigma", "seed",
}


def load_synth_spec(path):
    """Load a synthetic-data spec from JSON; unknown keys are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    for key in raw:
        if key not in _SYNTH_KEYS:
            raise ConfigError(f"unknown key {key!r}")
    for key in ("n_locations", "n_units", "rank"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    try:
        return SynthSpec(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def predictor_from_config(cfg) -> GapPredictor:
    """Build the estimator described by a validated run configuration."""
    rp, sn = cfg["rpca"], cfg["sensors"]
    n_sensors = "rank" if sn["mode"] == "exact" else sn["p"]
    return GapPredictor(
        n_sensors=n_sensors,
        lam=rp["lambda"],
        mu=rp["mu"],
        rpca_tol=rp["tolerance"],
        rpca_max_iter=rp["max_iterations"],
        tolerance=float(cfg["prediction"]["tolerance_inches"]),
    )


# ---------------------------------------------------------------------------
# model directories

_MODEL_META = "model.json"


def save_model(dirpath, predictor):
    """Persist a fitted :class:`GapPredictor` as plain text files."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    basis = predictor.basis_
    write_matrix(dirpath / "basis.mat", basis.modes)
    write_vector(dirpath / "singular_values.mat", basis.singular_values)
    write_sensor_indices(dirpath / "sensors.txt", predictor.sensor_indices_)
    if basis.location_mean is not None:
        write_vector(dirpath / "location_mean.mat", basis.location_mean)
    meta = {
        "rank": int(basis.rank),
        "n_locations": int(basis.n_locations),
        "truncation_threshold": float(basis.truncation_threshold),
        "sensor_mode": predictor.sensors_.mode,
        "n_sensors": int(predictor.sensor_indices_.size),
        "objective_logdet": _finite_or_none(
            predictor.sensors_.objective_logdet
        ),
        "rpca_converged": bool(predictor.rpca_converged_),
        "rpca_n_iter": int(predictor.rpca_n_iter_),
        "tolerance_inches": float(predictor.tolerance),
        "centered": basis.location_mean is not None,
    }
    with open(dirpath / _MODEL_META, "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _finite_or_none(value):
    value = float(value)
    return value if np.isfinite(value) else None


def load_model(dirpath):
    """Load a model directory; returns ``(basis, sensors, meta)``."""
    dirpath = Path(dirpath)
    meta_path = dirpath / _MODEL_META
    if not meta_path.exists():
        raise DataError(f"{dirpath} is not a model directory (no {_MODEL_META})")
    with open(meta_path, "r", encoding="utf-8") as handle:
        meta = json.load(handle)
    modes = read_matrix(dirpath / "basis.mat")
    singular_values = read_vector(dirpath / "singular_values.mat")
    mean_path = dirpath / "location_mean.mat"
    mean = read_vector(mean_path) if mean_path.exists() else None
    basis = FeatureBasis(
        modes=modes,
        singular_values=singular_values,
        rank=int(meta["rank"]),
        truncation_threshold=float(meta["truncation_threshold"]),
        location_mean=mean,
    )
    indices = read_sensor_indices(dirpath / "sensors.txt")
    objective = meta.get("objective_logdet")
    sensors = SensorSet(
        indices,
        meta.get("sensor_mode", "exact"),
        float("-inf") if objective is None else float(objective),
    )
    return basis, sensors, meta


# ---------------------------------------------------------------------------
# report files

def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for row in rows:
            handle.write(",".join(str(v) for v in row) + "\n")


def _histogram_rows(errors, edges):
    counts, _ = np.histogram(np.clip(errors, edges[0], edges[-1]), bins=edges)
    total = max(counts.sum(), 1)
    cumulative = np.cumsum(counts)
    return [
        ("%.6g" % edges[i], "%.6g" % edges[i + 1], int(counts[i]),
         "%.8g" % (counts[i] / total), "%.8g" % (cumulative[i] / total))
        for i in range(counts.size)
    ]


def _write_run_csvs(outdir, report: RunReport):
    _write_csv(
        outdir / "median_error_by_location.csv",
        "location,median_abs_error",
        [(i, "%.10g" % v)
         for i, v in enumerate(report.per_location_median_error)],
    )
    edges = log_bin_edges()
    _write_csv(
        outdir / "error_histogram.csv",
        "bin_lo,bin_hi,count,fraction,cum_fraction",
        _histogram_rows(report.pooled_abs_errors, edges)
        if report.pooled_abs_errors.size else [],
    )
    _write_csv(
        outdir / "sensor_ensemble.csv",
        "location,count",
        [(i, int(c)) for i, c in enumerate(report.sensor_counts)],
    )
    if report.baseline_pooled_abs_errors is not None:
        opt, _ = np.histogram(
            np.clip(report.pooled_abs_errors, edges[0], edges[-1]), bins=edges
        )
        rnd, _ = np.histogram(
            np.clip(report.baseline_pooled_abs_errors, edges[0], edges[-1]),
            bins=edges,
        )
        _write_csv(
            outdir / "baseline_histogram.csv",
            "bin_lo,bin_hi,count_optimized,count_random",
            [("%.6g" % edges[i], "%.6g" % edges[i + 1], int(opt[i]),
              int(rnd[i])) for i in range(opt.size)],
        )


def write_crossval_outputs(outdir, result, cfg):
    """Write the machine-readable report and its plot-ready CSV tables."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {"config": cfg, "report": result.to_dict()}
    with open(outdir / "report.json", "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    if isinstance(result, SegmentedReport):
        _write_csv(
            outdir / "segment_summary.csv",
            "segment,percent_accurate,avg_sensors,total_points",
            [(row.segment, "%.6g" % row.percent_accurate,
              "%.6g" % row.avg_sensors, row.total_points)
             for row in result.summary],
        )
        for label, report in result.per_segment.items():
            sub = outdir / f"segment_{label}"
            sub.mkdir(exist_ok=True)
            _write_run_csvs(sub, report)
    else:
        _write_run_csvs(outdir, result)


def write_sweep_csv(outdir, points):
    """Write the accuracy-versus-sensor-count table."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for pt in points:
        q = pt.error_quantiles
        rows.append((
            pt.p,
            "%.8g" % pt.overall_accuracy,
            "%.8g" % q[0.25], "%.8g" % q[0.5], "%.8g" % q[0.75],
            "%.8g" % q[0.9], "%.8g" % q[0.99], "%.8g" % q["max"],
            len(pt.underdetermined_units),
        ))
    _write_csv(
        outdir / "sweep.csv",
        "p,overall_accuracy,err_q25,err_q50,err_q75,err_q90,err_q99,"
        "err_max,underdetermined_folds",
        rows,
    )
