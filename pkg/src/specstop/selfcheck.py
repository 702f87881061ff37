"""Fast invariant checks behind ``specstop selfcheck``."""

from __future__ import annotations

import numpy as np

from .estimators import cutoff_estimate, summarize
from .noise import NoiseModel, sample_batch, true_component_variances
from .operators import make_diagonal_problem
from .rates import SourceSpec, exact_risk, limit_weights, make_source_element
from .stopping import algorithm1_weights


def random_weight_tuples(count: int, seed: int = 7):
    """Admissible (q, p, eps2, m) tuples with q > p - 1 > eps2 > 0."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = rng.uniform(1.1, 4.0)
        eps2 = rng.uniform(0.01, min(0.99, p - 1 - 1e-3))
        q = rng.uniform(p - 1 + 0.05, p + 4.0)
        m = int(rng.integers(5, 2000))
        out.append((q, p, eps2, m))
    return out


def check_limit_weight_bounds(count: int = 20, slack: float = 1e-12):
    worst_cap = worst_mono = -np.inf
    for q, p, eps2, m in random_weight_tuples(count):
        j = np.arange(1, m + 1, dtype=float)
        sigma = j ** (-q / 2)
        w = limit_weights(j ** (-p), sigma, eps2)
        worst_cap = max(worst_cap, float(np.max(w.d * sigma - 1.0)))
        ds = w.d * sigma
        worst_mono = max(worst_mono, float(np.max(np.diff(ds), initial=-np.inf)))
    ok = worst_cap <= slack and worst_mono <= slack
    return ok, f"max(d*sigma - 1) = {worst_cap:.2e}, max increase of d*sigma = {worst_mono:.2e}"


def check_sample_weights(seed: int = 11):
    problem = make_diagonal_problem(50, 2.0, 1.0, np.zeros(50))
    batch = sample_batch(problem, NoiseModel("gaussian_profile", p=2.0, c=1.0), 200, seed)
    s = summarize(batch)
    w = algorithm1_weights(s.s2, problem.sigma, 0.1, 50)
    ds = w.d * problem.sigma
    rise = float(np.max(np.diff(ds) / ds[:-1]))
    return rise <= 1e-12, f"max relative increase of d*sigma = {rise:.2e}"


def bias_variance_mc(n=1000, k=5, reps=500, m=200, seed=3):
    """Monte Carlo mean squared error of the cut-off estimate against the exact risk."""
    j = np.arange(1, m + 1, dtype=float)
    sigma = j ** -1.0
    xhat = make_source_element(sigma, SourceSpec(nu=1.0, rho=1.0, profile="flat", param=10))
    problem = make_diagonal_problem(m, 2.0, 1.0, xhat)
    model = NoiseModel("gaussian_profile", p=2.0, c=1.0)
    var = true_component_variances(problem, model)
    sq = np.empty(reps)
    for r in range(reps):
        batch = sample_batch(problem, model, n, seed, key=(r,))
        est = cutoff_estimate(batch.coeffs.mean(axis=0), problem.sigma, k)
        sq[r] = np.sum((est - problem.xhat) ** 2)
    exact = exact_risk(problem, var, n, k)
    se = sq.std(ddof=1) / np.sqrt(reps)
    return float(sq.mean()), exact, float(se)


def check_bias_variance():
    mc, exact, se = bias_variance_mc(reps=200)
    ok = abs(mc - exact) <= 3 * se
    return ok, f"MC {mc:.5e} vs exact {exact:.5e} (SE {se:.1e})"


CHECKS = (
    ("limit_weight_bounds", check_limit_weight_bounds),
    ("sample_weights_monotone", check_sample_weights),
    ("bias_variance_identity", check_bias_variance),
)


def run_all(stream=None):
    results = []
    for name, fn in CHECKS:
        ok, detail = fn()
        results.append((name, ok, detail))
        if stream is not None:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)
    return results
