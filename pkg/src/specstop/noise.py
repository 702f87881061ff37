"""Measurement batches under the supported noise models.

All randomness goes through Philox generators (counter-based, 4x64 rounds
with the constants published by Salmon et al.) keyed by a SeedSequence, so
a stream is a pure function of ``(seed, *key)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError, InvalidArgument
from .operators import SpectralProblem

KINDS = ("gaussian_profile", "rademacher_profile", "gpd_rhs")
DEFAULT_GPD_SHAPE = 0.2


def gpd_unit_scale(shape: float) -> float:
    """Scale giving a centred GPD with unit variance."""
    return math.sqrt((1 - shape) ** 2 * (1 - 2 * shape))


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian_profile"
    p: float = 2.0
    c: float = 1.0
    gpd_shape: float = DEFAULT_GPD_SHAPE
    gpd_scale: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown noise kind {self.kind!r}")
        if self.kind == "gpd_rhs":
            if not 0 < self.gpd_shape < 0.25:
                raise InvalidArgument("gpd_shape must lie in (0, 0.25) for a finite fourth moment")
            if self.gpd_scale is None:
                object.__setattr__(self, "gpd_scale", gpd_unit_scale(self.gpd_shape))
            if self.gpd_scale <= 0:
                raise InvalidArgument("gpd_scale must be positive")
        else:
            if self.p <= 1:
                raise InvalidArgument("profile exponent p must exceed 1")
            if self.c < 0:
                raise InvalidArgument("profile scale c must be nonnegative")

    @property
    def gpd_variance(self) -> float:
        k, s = self.gpd_shape, self.gpd_scale
        return s * s / ((1 - k) ** 2 * (1 - 2 * k))


@dataclass(frozen=True)
class MeasurementBatch:
    coeffs: np.ndarray
    seed: int
    model: NoiseModel

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def m(self) -> int:
        return self.coeffs.shape[1]


def gpd_from_uniform(u, shape: float, scale: float):
    """Inverse CDF of the generalised Pareto law (location 0), written in 1-F."""
    u = np.asarray(u, dtype=float)
    return scale * (u ** (-shape) - 1) / shape


def sample_gpd(shape: float, scale: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Centred generalised Pareto draws by inversion.

    Raw draws ``scale * (u**-shape - 1) / shape`` with ``u`` uniform on (0, 1]
    are shifted by the analytic mean ``scale / (1 - shape)``.
    """
    if not 0 < shape < 0.25:
        raise InvalidArgument("shape must lie in (0, 0.25)")
    if scale <= 0:
        raise InvalidArgument("scale must be positive")
    if count < 1:
        raise InvalidArgument("count must be at least 1")
    u = 1.0 - rng.random(count)
    return gpd_from_uniform(u, shape, scale) - scale / (1 - shape)


def _draw_standard(model: NoiseModel, rng, shape):
    if model.kind == "gaussian_profile":
        return rng.standard_normal(shape)
    if model.kind == "rademacher_profile":
        return np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    rows, cols = shape
    return sample_gpd(model.gpd_shape, model.gpd_scale, rows * cols, rng).reshape(shape)


def iter_coeff_chunks(problem: SpectralProblem, model: NoiseModel, n: int, seed: int,
                      key=(), chunk_rows: int = 4096) -> Iterator[np.ndarray]:
    """Yield the rows of a measurement batch in blocks.

    Draws are consumed row by row from one stream, so the concatenated
    chunks do not depend on ``chunk_rows``.
    """
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    if model.kind == "gpd_rhs" and problem.factor is None:
        raise ConfigError("gpd_rhs noise needs a problem built from a dense factor (deriv2)")
    rng = make_rng(seed, *key)
    m = problem.m
    if model.kind == "gpd_rhs":
        f = problem.factor
        level = np.linalg.norm(f.b) / math.sqrt(f.b.size)
    else:
        j = np.arange(1, m + 1, dtype=float)
        amp = model.c * j ** (-model.p / 2)
    done = 0
    while done < n:
        rows = min(chunk_rows, n - done)
        if model.kind == "gpd_rhs":
            delta = _draw_standard(model, rng, (rows, f.b.size))
            yield f.project(f.b + level * delta)
        else:
            xi = _draw_standard(model, rng, (rows, m))
            yield problem.yhat + amp * xi
        done += rows


def sample_batch(problem: SpectralProblem, model: NoiseModel, n: int, seed: int,
                 key=()) -> MeasurementBatch:
    coeffs = np.concatenate(list(iter_coeff_chunks(problem, model, n, seed, key)), axis=0)
    return MeasurementBatch(coeffs=coeffs, seed=int(seed), model=model)


def data_mean(problem: SpectralProblem, model: NoiseModel) -> np.ndarray:
    """Expected measurement coefficients E(Y_1, u_j)."""
    if model.kind == "gpd_rhs":
        return problem.factor.project(problem.factor.b)
    return np.asarray(problem.yhat)


def true_component_variances(problem: SpectralProblem, model: NoiseModel) -> np.ndarray:
    if model.kind == "gpd_rhs":
        if problem.factor is None:
            raise ConfigError("gpd_rhs noise needs a dense factor")
        b = problem.factor.b
        return problem.factor.sigma ** 2 * (b @ b / b.size) * model.gpd_variance
    j = np.arange(1, problem.m + 1, dtype=float)
    return model.c ** 2 * j ** (-model.p)


def export_batch(batch: MeasurementBatch, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "coeff"])
        for i, row in enumerate(batch.coeffs, 1):
            for j, v in enumerate(row, 1):
                w.writerow([i, j, f"{v:.17g}"])
