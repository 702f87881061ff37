"""Sample statistics, the spectral cut-off estimator and data-error estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InsufficientSamples, InvalidArgument, UndefinedRelativeError


@dataclass(frozen=True)
class BatchSummary:
    mean: np.ndarray
    s2: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return self.mean.size


def _block_stats(block: np.ndarray):
    # corrected two-pass: the second sum cancels the rounding left in the mean
    count = block.shape[0]
    mean = block.sum(axis=0) / count
    dev = block - mean
    corr = dev.sum(axis=0)
    mean = mean + corr / count
    m2 = np.einsum("ij,ij->j", dev, dev) - corr * corr / count
    return count, mean, np.maximum(m2, 0.0)


def summarize_chunks(chunks: Iterable[np.ndarray]) -> BatchSummary:
    """Mean and unbiased variances of each column over a stream of row blocks.

    Blocks are merged with the pairwise update of Chan, Golub and LeVeque,
    so only one block is held in memory at a time.
    """
    n = 0
    mean = m2 = None
    for block in chunks:
        block = np.atleast_2d(np.asarray(block, dtype=float))
        nb, mb, m2b = _block_stats(block)
        if n == 0:
            n, mean, m2 = nb, mb, m2b
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta * delta * (n * nb / tot)
        n = tot
    if n < 2:
        raise InsufficientSamples(f"sample variances need n >= 2 (got {n})")
    return BatchSummary(mean=mean, s2=m2 / (n - 1), n=n)


def summarize(batch) -> BatchSummary:
    coeffs = getattr(batch, "coeffs", batch)
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.shape[0] < 2:
        raise InsufficientSamples(f"sample variances need n >= 2 (got {coeffs.shape[0]})")
    return summarize_chunks([coeffs])


def cutoff_estimate(mean, sigma, k: int) -> np.ndarray:
    """Coefficients (in the v-basis) of the spectral cut-off solution at level k."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    m = min(mean.size, sigma.size)
    if not 0 <= k <= m:
        raise InvalidArgument(f"truncation level {k} outside [0, {m}]")
    out = np.zeros(sigma.size)
    out[:k] = mean[:k] / sigma[:k]
    return out


def relative_error(x_est, xhat) -> float:
    xhat = np.asarray(xhat, dtype=float)
    ref = np.linalg.norm(xhat)
    if ref == 0:
        raise UndefinedRelativeError("relative error undefined for a zero ground truth")
    x_est = np.asarray(x_est, dtype=float)
    return float(np.linalg.norm(x_est - xhat) / ref)


def noise_level_simple(n: int) -> float:
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    return 1.0 / math.sqrt(n)


def noise_level_sample(batch) -> float:
    """sqrt(sum_j s2_j / n); accepts a batch or a BatchSummary."""
    summary = batch if isinstance(batch, BatchSummary) else summarize(batch)
    return math.sqrt(float(np.sum(summary.s2)) / summary.n)


def risk_curve(sigma, xhat, var, n: int, m_eff=None) -> np.ndarray:
    """Exact mean squared error of the cut-off estimate for k = 0..m_eff.

    ``risk[k] = (1/n) sum_{j<=k} var_j / sigma_j^2 + sum_{j>k} xhat_j^2``;
    the tail runs over all stored components, so components beyond
    ``m_eff`` enter as a constant.
    """
    sigma = np.asarray(sigma, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    var = np.asarray(var, dtype=float)
    m = sigma.size
    m_eff = m if m_eff is None else int(m_eff)
    if not 0 <= m_eff <= m:
        raise InvalidArgument(f"m_eff {m_eff} outside [0, {m}]")
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    prop = np.concatenate([[0.0], np.cumsum(var[:m_eff] / sigma[:m_eff] ** 2)]) / n
    sq = xhat ** 2
    tail = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])
    return prop + tail[:m_eff + 1]
