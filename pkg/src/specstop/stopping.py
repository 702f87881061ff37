"""Truncation-level selection rules for spectral cut-off.

Every discrepancy-type rule returns the smallest k whose (weighted)
residual tail is at most the threshold, i.e. the first k at which the
``while tail > delta: k += 1`` loop stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateNoiseError, InvalidArgument
from .estimators import BatchSummary, risk_curve, summarize

RULES = ("plain", "known_p", "algorithm1", "a_priori", "oracle")
VARIANCE_BRANCH = "variance_branch"
CAP_BRANCH = "cap_branch"


@dataclass(frozen=True)
class WeightSequence:
    d: np.ndarray
    eps2: Optional[float] = None
    cap_flags: Optional[tuple] = None
    squared: Optional[np.ndarray] = None  # exact d^2 when the recursion produced it

    @property
    def d2(self) -> np.ndarray:
        return self.d ** 2 if self.squared is None else self.squared


@dataclass(frozen=True)
class StoppingOutcome:
    k: int
    rule: str
    delta_used: float
    m_n: int
    trace: Optional[np.ndarray] = None
    weights: Optional[WeightSequence] = None


def effective_components(n: int, eps1: float, m: int) -> int:
    """min(floor(n^(1-eps1)), m)."""
    if not 0 < eps1 < 1:
        raise InvalidArgument("eps1 must lie in (0, 1)")
    # the relative nudge keeps exact powers such as 100**0.5 from flooring down
    m_n = int(math.floor(n ** (1 - eps1) * (1 + 1e-12)))
    return max(1, min(m_n, m))


def tail_norms(values) -> np.ndarray:
    """tails[k] = sqrt(sum_{j>k} values_j^2) for k = 0..len(values)."""
    sq = np.asarray(values, dtype=float) ** 2
    return np.sqrt(np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]]))


def _first_crossing(tails, delta) -> int:
    return int(np.argmax(tails <= delta))


def plain_discrepancy(mean, delta: float, m_eff: int, tau: float = 1.0) -> StoppingOutcome:
    if delta < 0:
        raise InvalidArgument("noise level must be nonnegative")
    mean = np.asarray(mean, dtype=float)
    if not 0 <= m_eff <= mean.size:
        raise InvalidArgument(f"m_eff {m_eff} outside [0, {mean.size}]")
    tails = tail_norms(mean[:m_eff])
    level = tau * delta
    return StoppingOutcome(k=_first_crossing(tails, level), rule="plain",
                           delta_used=level, m_n=m_eff, trace=tails)


def known_p_weights(p: float, eps: float, m_eff: int) -> WeightSequence:
    """Fixed weights j^((p-1-eps)/2) for a known variance decay exponent p."""
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    if eps >= p - 1:
        raise InvalidArgument(f"need p > 1 + eps (got p={p}, eps={eps})")
    j = np.arange(1, m_eff + 1, dtype=float)
    return WeightSequence(d=j ** ((p - 1 - eps) / 2))


def weight_recursion(ratio, sigma, eps2: float, m_eff: int) -> WeightSequence:
    """Shared recursion behind the sample and the limit weights.

    ``ratio[j]`` is total variance over component variance (``inf`` where
    the component variance vanishes, which forces the cap branch).
    """
    if not 0 < eps2 < 1:
        raise InvalidArgument("eps2 must lie in (0, 1)")
    sigma = np.asarray(sigma, dtype=float)
    d2 = np.empty(m_eff)
    flags = []
    first = ratio[0]
    cap = 1.0 / sigma[0] ** 2
    if first < cap:
        d2[0], branch = first, VARIANCE_BRANCH
    else:
        d2[0], branch = cap, CAP_BRANCH
    flags.append(branch)
    for i in range(1, m_eff):
        j = i + 1
        var_arg = j ** (-(1 + eps2)) * ratio[i]
        cap_arg = (sigma[i - 1] ** 2 / sigma[i] ** 2) * d2[i - 1]
        if var_arg < cap_arg:
            d2[i], branch = var_arg, VARIANCE_BRANCH
        else:
            d2[i], branch = cap_arg, CAP_BRANCH
        flags.append(branch)
    return WeightSequence(d=np.sqrt(d2), eps2=eps2, cap_flags=tuple(flags), squared=d2)


def _variance_ratios(var, m_eff):
    var = np.asarray(var, dtype=float)[:m_eff]
    total = float(np.sum(var))
    if total <= 0:
        raise DegenerateNoiseError("all component variances are zero")
    with np.errstate(divide="ignore"):
        return np.where(var > 0, total / np.where(var > 0, var, 1.0), np.inf)


def algorithm1_weights(s2, sigma, eps2: float, m_eff: int) -> WeightSequence:
    """Weights from estimated variances, normalised by their sum over j <= m_eff."""
    if m_eff < 1:
        raise InvalidArgument("m_eff must be at least 1")
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma[:m_eff] <= 0) or np.any(np.diff(sigma[:m_eff]) > 0):
        raise InvalidArgument("sigma must be positive and nonincreasing")
    return weight_recursion(_variance_ratios(s2, m_eff), sigma, eps2, m_eff)


def modified_noise_level(weights: WeightSequence, s2, n: int) -> float:
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    d2 = weights.d2
    s2 = np.asarray(s2, dtype=float)[:d2.size]
    return math.sqrt(float(np.sum(d2 * s2)) / n)


def weighted_discrepancy(weights: WeightSequence, mean, delta_prime: float, m_eff: int,
                         rule: str = "algorithm1") -> StoppingOutcome:
    if delta_prime < 0:
        raise InvalidArgument("noise level must be nonnegative")
    mean = np.asarray(mean, dtype=float)
    if m_eff > min(mean.size, weights.d.size):
        raise InvalidArgument("weights and mean must cover m_eff components")
    tails = tail_norms(weights.d[:m_eff] * mean[:m_eff])
    return StoppingOutcome(k=_first_crossing(tails, delta_prime), rule=rule,
                           delta_used=delta_prime, m_n=m_eff, trace=tails, weights=weights)


def algorithm1_stop(weights: WeightSequence, mean, delta_prime: float,
                    m_eff: int) -> StoppingOutcome:
    return weighted_discrepancy(weights, mean, delta_prime, m_eff, rule="algorithm1")


def _as_summary(batch) -> BatchSummary:
    return batch if isinstance(batch, BatchSummary) else summarize(batch)


def run_algorithm1(batch, sigma, eps1: float = 0.5, eps2: float = 0.1,
                   tau: float = 1.0) -> StoppingOutcome:
    """Modified discrepancy principle with variance-estimated weights.

    Accepts a MeasurementBatch or an already computed BatchSummary.
    """
    summary = _as_summary(batch)
    sigma = np.asarray(sigma, dtype=float)
    m_n = effective_components(summary.n, eps1, min(summary.m, sigma.size))
    if np.sum(summary.s2[:m_n]) == 0:
        # noise-free data: with the empty tail as the only admissible level
        # the loop stops at the first k with a zero weighted tail
        tails = tail_norms(summary.mean[:m_n])
        return StoppingOutcome(k=_first_crossing(tails, 0.0), rule="algorithm1",
                               delta_used=0.0, m_n=m_n, trace=tails)
    weights = algorithm1_weights(summary.s2, sigma, eps2, m_n)
    delta = tau * modified_noise_level(weights, summary.s2, summary.n)
    return algorithm1_stop(weights, summary.mean, delta, m_n)


def run_known_p(batch, p: float, eps: float, m_eff: Optional[int] = None,
                tau: float = 1.0) -> StoppingOutcome:
    """Discrepancy principle after rescaling by the fixed weights j^((p-1-eps)/2)."""
    summary = _as_summary(batch)
    m_eff = summary.m if m_eff is None else m_eff
    weights = known_p_weights(p, eps, m_eff)
    delta = tau * modified_noise_level(weights, summary.s2, summary.n)
    return weighted_discrepancy(weights, summary.mean, delta, m_eff, rule="known_p")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def a_priori_k(n: int, rho: float, nu: float, q: float, p: float, m: Optional[int] = None) -> int:
    """A priori truncation level with proportionality constant one."""
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    if rho <= 0 or nu <= 0 or q <= 0 or p <= 1:
        raise InvalidArgument("need rho, nu, q > 0 and p > 1")
    if q - p <= -1:
        expo = 1.0 / (nu * q)
    else:
        expo = 1.0 / ((1 + nu) * q + 1 - p)
    k = max(1, _round_half_up((rho * n) ** expo))
    return k if m is None else min(k, m)


def oracle_k(problem, var, n: int, m_eff: Optional[int] = None):
    """Risk-minimising truncation level (smallest on ties) and its risk."""
    risks = risk_curve(problem.sigma, problem.xhat, var, n, m_eff)
    k = int(np.argmin(risks))
    return k, float(risks[k])
