"""Closed-form rates, source elements and deterministic limit weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .estimators import risk_curve
from .stopping import WeightSequence, _variance_ratios, weight_recursion

PROFILES = ("single_index", "flat", "geometric")


@dataclass(frozen=True)
class SourceSpec:
    """Source element (K*K)^(nu/2) xi with |xi| = rho.

    ``param`` is j0 for ``single_index``, J for ``flat`` and the ratio r
    for ``geometric``.
    """

    nu: float
    rho: float
    profile: str = "flat"
    param: float = 10

    def __post_init__(self):
        if self.nu <= 0 or self.rho <= 0:
            raise InvalidArgument("nu and rho must be positive")
        if self.profile not in PROFILES:
            raise InvalidArgument(f"unknown source profile {self.profile!r}")


@dataclass(frozen=True)
class RateParams:
    q: float
    p: float
    nu: float = 1.0
    rho: float = 1.0
    eps1: float = 0.5
    eps2: float = 0.1
    L: float = 1.0

    @property
    def nu_prime(self) -> float:
        """Smoothness relative to the rescaled operator."""
        return self.q * self.nu / (self.q + 1 + self.eps2 - self.p)


def make_source_element(sigma, spec: SourceSpec) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    m = sigma.size
    xi = np.zeros(m)
    if spec.profile == "single_index":
        j0 = int(spec.param)
        if not 1 <= j0 <= m:
            raise InvalidArgument(f"index {j0} outside [1, {m}]")
        xi[j0 - 1] = spec.rho
    elif spec.profile == "flat":
        J = int(spec.param)
        if not 1 <= J <= m:
            raise InvalidArgument(f"support {J} outside [1, {m}]")
        xi[:J] = spec.rho / math.sqrt(J)
    else:
        r = float(spec.param)
        if not 0 < r < 1:
            raise InvalidArgument("geometric ratio must lie in (0, 1)")
        xi = r ** np.arange(1, m + 1, dtype=float)
        xi *= spec.rho / np.linalg.norm(xi)
    return sigma ** spec.nu * xi


def source_radius(xhat, sigma, nu: float) -> float:
    """Smallest rho with xhat in the source set of smoothness nu for these singular values."""
    xhat = np.asarray(xhat, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return float(np.linalg.norm(xhat / sigma ** nu))


def _check_basic(q, p):
    if q <= 0 or p <= 1:
        raise InvalidArgument("need q > 0 and p > 1")


def rate_branch(q: float, p: float) -> str:
    gap = q - p
    if gap < -1:
        return "well_posed"
    if gap == -1:
        return "log"
    return "polynomial"


def minimax_rate(n: float, params: RateParams) -> float:
    """Order of the optimal risk over the source set (squared-error scale)."""
    q, p, nu, rho = params.q, params.p, params.nu, params.rho
    _check_basic(q, p)
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    if nu <= 0 or rho <= 0:
        raise InvalidArgument("need nu > 0 and rho > 0")
    branch = rate_branch(q, p)
    if branch == "well_posed":
        return 1.0 / n
    if branch == "log":
        return math.log(n * rho) / n
    expo = nu / (nu + 1 - (p - 1) / q)
    return rho ** ((q + 1 - p) / ((nu + 1) * q + 1 - p)) * (1.0 / n) ** expo


def fixed_weight_bound(n: float, params: RateParams, eps: float) -> float:
    """Error bound for fixed weights j^((p-1-eps)/2) (error scale, L = params.L)."""
    q, p, nu, rho = params.q, params.p, params.nu, params.rho
    _check_basic(q, p)
    if not (q > p - 1 and 0 < eps < p - 1):
        raise InvalidArgument("need q > p - 1 > eps > 0")
    nu_p = q * nu / (q + 1 + eps - p)
    return params.L * rho ** (1 / (1 + nu_p)) * (1 / math.sqrt(n)) ** (nu_p / (nu_p + 1))


def adaptive_weight_bound(n: float, params: RateParams) -> float:
    """Error bound attained by the modified discrepancy principle (error scale).

    The discretisation term decays like sigma_{m_n}^nu rho, i.e. with the
    positive exponent (1 - eps1) q nu in 1/sqrt(n).
    """
    q, p, nu, rho = params.q, params.p, params.nu, params.rho
    e1, e2 = params.eps1, params.eps2
    if not (q > p - 1 > e2 > 0):
        raise InvalidArgument("need q > p - 1 > eps2 > 0")
    if not 0 < e1 < 1:
        raise InvalidArgument("eps1 must lie in (0, 1)")
    if nu <= 0 or rho < 0 or n < 1:
        raise InvalidArgument("need nu > 0, rho >= 0, n >= 1")
    h = 1 / math.sqrt(n)
    stat = (rho ** ((q + 1 + e2 - p) / ((nu + 1) * q + 1 + e2 - p))
            * h ** (nu / (nu + 1 - (p - 1 - e2) / q)))
    disc = rho * h ** ((1 - e1) * q * nu)
    return params.L * max(stat, disc)


def limit_weights(var, sigma, eps2: float) -> WeightSequence:
    """Deterministic weights obtained when sample variances are replaced by true ones.

    The total variance is summed over the finitely many stored components.
    """
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise InvalidArgument("variances must be nonnegative")
    return weight_recursion(_variance_ratios(var, var.size), sigma, eps2, var.size)


def exact_risk(problem, var, n: int, k: int) -> float:
    if not 0 <= k <= problem.m:
        raise InvalidArgument(f"k {k} outside [0, {problem.m}]")
    return float(risk_curve(problem.sigma, problem.xhat, var, n)[k])


def worst_case_risk(sigma, var, n: int, nu: float, rho: float) -> float:
    """inf over k of the sup over the source set of the exact risk.

    For fixed k the supremum puts all of xi on the first discarded
    component, giving ``rho^2 sigma_{k+1}^(2 nu)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    var = np.asarray(var, dtype=float)
    prop = np.concatenate([[0.0], np.cumsum(var / sigma ** 2)]) / n
    bias = np.concatenate([rho ** 2 * sigma ** (2 * nu), [0.0]])
    return float(np.min(prop + bias))


def rate_table(n_values, q_values, p_values, nu_values, rho_values):
    rows = []
    for n in n_values:
        for q in q_values:
            for p in p_values:
                for nu in nu_values:
                    for rho in rho_values:
                        params = RateParams(q=q, p=p, nu=nu, rho=rho)
                        rows.append((n, q, p, nu, rho, rate_branch(q, p),
                                     minimax_rate(n, params)))
    return rows
