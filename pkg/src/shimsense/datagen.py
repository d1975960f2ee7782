"""Synthetic low-rank plus sparse gap-data generator with retained ground truth.

Stands in for production measurement data: a random orthonormal mode set with
decaying per-mode amplitudes, optional gross outliers on a uniform random
support, and optional Gaussian measurement noise. Every draw comes from one
seeded PCG64 generator in a fixed order (modes, coefficients, outliers,
noise), so identical specs give identical data on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic data set.

    ``coeff_scale`` sets the per-location RMS amplitude, in inches, of the
    dominant mode's contribution; mode ``k`` is scaled by ``1/k`` so the
    spectrum decays and rank selection stays non-trivial. ``outlier_fraction``
    of the entries (exactly, rounded) are set to ``+/- outlier_magnitude``.
    """

    n_locations: int
    n_units: int
    rank: int
    coeff_scale: float = 0.05
    outlier_fraction: float = 0.0
    outlier_magnitude: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_locations < 1 or self.n_units < 1:
            raise ValueError("n_locations and n_units must be positive")
        if not 1 <= self.rank <= min(self.n_locations, self.n_units):
            raise ValueError(
                f"rank must be in [1, {min(self.n_locations, self.n_units)}]"
            )
        if self.coeff_scale < 0 or self.outlier_magnitude < 0 \
                or self.noise_sigma < 0:
            raise ValueError("scales must be non-negative")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")


@dataclass(eq=False)
class SynthData:
    """Generated matrix plus every piece of ground truth behind it."""

    X: np.ndarray
    low_rank_true: np.ndarray
    sparse_true: np.ndarray
    modes_true: np.ndarray
    coeffs_true: np.ndarray
    spec: SynthSpec


def generate(spec: SynthSpec) -> SynthData:
    """Draw one synthetic data set from a spec."""
    n, m, r = spec.n_locations, spec.n_units, spec.rank
    rng = np.random.default_rng(spec.seed)

    modes = np.linalg.qr(rng.standard_normal((n, r)))[0][:, :r]
    # sqrt(n) converts the per-coefficient scale into a per-entry RMS, since
    # orthonormal mode entries are O(1/sqrt(n)).
    mode_scale = spec.coeff_scale * np.sqrt(n) / np.arange(1, r + 1)
    coeffs = rng.standard_normal((r, m)) * mode_scale[:, None]
    low_rank = modes @ coeffs

    sparse = np.zeros((n, m))
    if spec.outlier_fraction > 0.0:
        count = int(round(spec.outlier_fraction * n * m))
        positions = rng.choice(n * m, size=count, replace=False)
        signs = rng.choice(np.array([-1.0, 1.0]), size=count)
        sparse.flat[positions] = signs * spec.outlier_magnitude

    X = low_rank + sparse
    if spec.noise_sigma > 0.0:
        X = X + spec.noise_sigma * rng.standard_normal((n, m))

    return SynthData(X, low_rank, sparse, modes, coeffs, spec)
