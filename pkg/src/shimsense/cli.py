"""Command-line interface: synth, train, predict, crossval, sweep.

All commands are non-interactive and idempotent given the same inputs and
seeds. Failures print one machine-parsable line to stderr,
``error: <class>: <message>``, with a distinct exit code per class:
2 for configuration errors, 3 for data errors, 4 for non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .datagen import generate
from .exceptions import ConfigError, ConvergenceError, DataError
from .pipeline import loo_crossval, segment_crossval, sensor_sweep
from .reconstruct import predict_full

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


def cmd_synth(args):
    spec = sio.load_synth_spec(args.spec)
    data = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sio.write_matrix(out / "X.mat", data.X)
    sio.write_matrix(out / "low_rank_true.mat", data.low_rank_true)
    sio.write_matrix(out / "sparse_true.mat", data.sparse_true)
    sio.write_matrix(out / "basis_true.mat", data.modes_true)
    sio.write_matrix(out / "coeffs_true.mat", data.coeffs_true)
    print(f"synth: wrote {spec.n_locations}x{spec.n_units} data to {out}")
    return 0


def cmd_train(args):
    cfg = sio.load_config(args.config)
    X = sio.read_matrix(args.data)
    predictor = sio.predictor_from_config(cfg)
    predictor.fit(X.T)
    sio.save_model(args.out, predictor)
    print(
        f"train: n={X.shape[0]} units={X.shape[1]} rank={predictor.rank_} "
        f"sensors={predictor.sensor_indices_.size} -> {args.out}"
    )
    return 0


def cmd_predict(args):
    basis, _, _ = sio.load_model(args.model)
    measurement = sio.read_measurements(args.measurements)
    prediction = predict_full(basis, measurement)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sio.write_vector(out / "prediction.mat", prediction.full_field)
    sio.write_vector(out / "coefficients.mat", prediction.coefficients)
    print(f"predict: wrote {prediction.full_field.size} gap values to {out}")
    return 0


def cmd_crossval(args):
    cfg = sio.load_config(args.config)
    X = sio.read_matrix(args.data)
    predictor = sio.predictor_from_config(cfg)
    kwargs = dict(
        tolerance=float(cfg["prediction"]["tolerance_inches"]),
        baseline_trials=cfg["crossval"]["baseline_trials"],
        seed=cfg["crossval"]["seed"],
    )
    if cfg["segmentation"] != "none":
        segment_map = sio.read_segment_map(cfg["segmentation"])
        result = segment_crossval(X, segment_map, predictor, **kwargs)
    else:
        result = loo_crossval(X, predictor, **kwargs)
    sio.write_crossval_outputs(args.out, result, cfg)
    print(f"crossval: overall_accuracy={result.overall_accuracy:.6f} "
          f"-> {args.out}")
    return 0


def cmd_sweep(args):
    cfg = sio.load_config(args.config)
    X = sio.read_matrix(args.data)
    predictor = sio.predictor_from_config(cfg)
    try:
        p_values = [int(v) for v in args.p.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--p must be comma-separated integers: {exc}")
    if not p_values:
        raise ConfigError("--p must list at least one sensor count")
    points = sensor_sweep(
        X, p_values, predictor,
        tolerance=float(cfg["prediction"]["tolerance_inches"]),
        seed=cfg["crossval"]["seed"],
    )
    sio.write_sweep_csv(args.out, points)
    print(f"sweep: {len(points)} sensor counts -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shimsense",
        description="Learn gap patterns, place optimal sensors, predict "
                    "full gap fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic gap data")
    p.add_argument("--spec", required=True, help="JSON spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="learn a basis and sensor locations")
    p.add_argument("--data", required=True, help="training matrix file")
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--out", required=True, help="model output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a full gap field")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--measurements", required=True,
                   help="file of index,value lines")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("crossval", help="leave-one-out cross-validation")
    p.add_argument("--data", required=True, help="data matrix file")
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", help="accuracy versus sensor count")
    p.add_argument("--data", required=True, help="data matrix file")
    p.add_argument("--p", required=True,
                   help="comma-separated sensor counts, e.g. 26,40,60")
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def _fail(kind, exc, code):
    message = " ".join(str(exc).split())
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except DataError as exc:
        return _fail("data", exc, EXIT_DATA)
    except ConvergenceError as exc:
        return _fail("convergence", exc, EXIT_CONVERGENCE)
    except np.linalg.LinAlgError as exc:
        return _fail("data", exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
