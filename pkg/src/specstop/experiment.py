"""Seeded Monte Carlo driver comparing truncation rules across sample sizes.

Each cell ``(rule, n, rep)`` draws its batch from a stream keyed by
``(master_seed, n, rule_id, rep)``; results are collected in cell order, so
the table does not depend on how many worker threads ran.
"""

from __future__ import annotations

import csv
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidArgument, SpecstopError
from .estimators import cutoff_estimate, relative_error, summarize_chunks
from .noise import NoiseModel, iter_coeff_chunks, true_component_variances
from .operators import (SpectralProblem, deriv2_problem, make_deriv2,
                        make_diagonal_problem, svd)
from .rates import SourceSpec, make_source_element
from . import stopping

log = logging.getLogger(__name__)

RULE_NAMES = ("plain", "known_p", "algorithm1", "a_priori", "oracle",
              "oracle_exact", "oracle_empirical")
RULE_PARAMS = {
    "plain": ("tau", "delta"),
    "known_p": ("tau", "p_known", "eps_known"),
    "algorithm1": ("eps1", "eps2", "tau"),
    "a_priori": ("nu", "q", "p", "rho"),
    "oracle": (),
    "oracle_exact": (),
    "oracle_empirical": (),
}
TABLE_HEADER = ["rule", "n", "R", "median_err", "q25", "q75", "min", "max", "mean_k", "seed"]
RAW_HEADER = ["rule", "n", "rep", "rel_err", "k"]


class ExperimentError(SpecstopError):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


@dataclass(frozen=True)
class RuleSpec:
    name: str
    params: Tuple[Tuple[str, object], ...] = ()

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ";".join(f"{k}={v}" for k, v in self.params)
        return f"{self.name}[{inner}]"

    @property
    def rule_id(self) -> int:
        return zlib.crc32(self.label.encode())

    def get(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "deriv2"
    m: int = 200
    case: int = 1
    symmetrize: bool = True
    q: float = 2.0
    scale: float = 1.0
    source: str = "flat"
    source_param: float = 10
    nu: float = 1.0
    rho: float = 1.0
    noise: str = "gpd_rhs"
    noise_p: float = 2.0
    noise_c: float = 1.0
    gpd_shape: float = 0.2
    gpd_scale: Optional[float] = None
    n_list: Tuple[int, ...] = (50, 500, 5000, 50000, 500000)
    replications: int = 100
    master_seed: int = 2021
    rules: Tuple[RuleSpec, ...] = (RuleSpec("plain"),)
    eps1: float = 0.5
    eps2: float = 0.1
    tau: float = 1.0
    delta: str = "sample"
    p_known: Optional[float] = None
    eps_known: float = 0.1
    threads: int = 1
    chunk_rows: int = 4096

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        ns = list(self.n_list)
        if not ns or any(n < 2 for n in ns):
            raise ConfigError("every n must be at least 2")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_list must be strictly increasing")
        if self.problem not in ("deriv2", "diagonal"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.delta not in ("sample", "simple"):
            raise ConfigError("delta must be 'sample' or 'simple'")
        for rule in self.rules:
            if rule.name not in RULE_PARAMS:
                raise ConfigError(f"unknown rule {rule.name!r}")
            bad = [k for k, _ in rule.params if k not in RULE_PARAMS[rule.name]]
            if bad:
                raise ConfigError(f"rule {rule.name} does not take {bad}")

    @cached_property
    def spectral_problem(self) -> SpectralProblem:
        return build_problem(self)

    @cached_property
    def noise_model(self) -> NoiseModel:
        return NoiseModel(kind=self.noise, p=self.noise_p, c=self.noise_c,
                          gpd_shape=self.gpd_shape, gpd_scale=self.gpd_scale)

    @cached_property
    def true_variances(self) -> np.ndarray:
        return true_component_variances(self.spectral_problem, self.noise_model)

    def expanded_rules(self) -> List[RuleSpec]:
        out = []
        for rule in self.rules:
            if rule.name == "oracle":
                out += [RuleSpec("oracle_exact"), RuleSpec("oracle_empirical")]
            else:
                out.append(rule)
        return out

    def param(self, rule: RuleSpec, key):
        value = rule.get(key)
        if value is not None:
            return value
        defaults = {"eps1": self.eps1, "eps2": self.eps2, "tau": self.tau,
                    "delta": self.delta, "eps_known": self.eps_known, "nu": self.nu,
                    "rho": self.rho}
        if key in defaults:
            return defaults[key]
        problem = self.spectral_problem
        if key == "q":
            return problem.decay_q
        if key in ("p", "p_known"):
            if key == "p_known" and self.p_known is not None:
                return self.p_known
            if self.noise == "gpd_rhs":
                # component variances scale like sigma_j(A)^2 = sigma_j(K)
                return problem.decay_q / 2
            return self.noise_p
        raise ConfigError(f"no value for {key!r} in rule {rule.label}")


def build_problem(config: ExperimentConfig) -> SpectralProblem:
    if config.problem == "deriv2":
        if config.symmetrize:
            return deriv2_problem(config.m, config.case)
        A, x_true, _ = make_deriv2(config.m, config.case)
        sigma, _, V = svd(A)
        return SpectralProblem(sigma=sigma, xhat=V.T @ x_true, yhat=sigma * (V.T @ x_true),
                               decay_q=4.0)
    j = np.arange(1, config.m + 1, dtype=float)
    sigma = config.scale * j ** (-config.q / 2)
    spec = SourceSpec(nu=config.nu, rho=config.rho, profile=config.source,
                      param=config.source_param)
    return make_diagonal_problem(config.m, config.q, config.scale,
                                 make_source_element(sigma, spec))


# ---------------------------------------------------------------- config file

_INT_KEYS = {"m", "case", "replications", "master_seed", "threads", "chunk_rows"}
_FLOAT_KEYS = {"q", "scale", "nu", "rho", "noise_p", "noise_c", "gpd_shape", "gpd_scale",
               "eps1", "eps2", "tau", "p_known", "eps_known"}
_STR_KEYS = {"problem", "noise", "delta"}


def _scalar(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_rules(text: str) -> Tuple[RuleSpec, ...]:
    """``plain; algorithm1 eps2=0.5; oracle_exact`` -> RuleSpecs."""
    rules = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        params = []
        for item in parts[1:]:
            if "=" not in item:
                raise ConfigError(f"rule parameter {item!r} is not key=value")
            k, v = item.split("=", 1)
            params.append((k, _scalar(v)))
        rules.append(RuleSpec(parts[0], tuple(params)))
    if not rules:
        raise ConfigError("no rules given")
    return tuple(rules)


def parse_config(text: str, **overrides) -> ExperimentConfig:
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _STR_KEYS:
            values[key] = value
        elif key == "symmetrize":
            values[key] = value.lower() in ("1", "true", "yes")
        elif key == "source":
            profile, _, param = value.partition(":")
            values["source"] = profile.strip()
            if param:
                values["source_param"] = float(param)
        elif key == "n_list":
            values[key] = tuple(int(float(v)) for v in value.replace(",", " ").split())
        elif key == "rules":
            values[key] = parse_rules(value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


# ---------------------------------------------------------------- replications

@dataclass(frozen=True)
class Replication:
    rule: str
    n: int
    rep: int
    rel_err: float
    k: int
    error: Optional[str] = None


def _summary(config, n, columns, key):
    chunks = iter_coeff_chunks(config.spectral_problem, config.noise_model, n,
                               config.master_seed, key=key, chunk_rows=config.chunk_rows)
    if columns < config.spectral_problem.m:
        chunks = (c[:, :columns] for c in chunks)
    return summarize_chunks(chunks)


def run_replication(config: ExperimentConfig, n: int, rule: RuleSpec, rep_index: int):
    """Relative error and chosen k for one cell; a pure function of its arguments."""
    problem = config.spectral_problem
    m = problem.m
    key = (n, rule.rule_id, rep_index)
    xnorm = np.linalg.norm(problem.xhat)
    if rule.name == "oracle_exact":
        k, risk = stopping.oracle_k(problem, config.true_variances, n)
        return math.sqrt(risk) / xnorm, k
    if rule.name == "a_priori":
        p = config.param
        k = stopping.a_priori_k(n, p(rule, "rho"), p(rule, "nu"), p(rule, "q"),
                                p(rule, "p"), m)
        summary = _summary(config, n, k, key) if k > 0 else None
        mean = summary.mean if summary is not None else np.zeros(0)
        est = cutoff_estimate(np.pad(mean, (0, m - mean.size)), problem.sigma, k)
        return relative_error(est, problem.xhat), k

    if rule.name == "algorithm1":
        eps1 = config.param(rule, "eps1")
        columns = stopping.effective_components(n, eps1, m)
    else:
        columns = m
    summary = _summary(config, n, columns, key)
    mean = np.pad(summary.mean, (0, m - summary.m))

    if rule.name == "oracle_empirical":
        est = mean / problem.sigma
        errs = np.concatenate([[0.0], np.cumsum((est - problem.xhat) ** 2)])
        sq = problem.xhat ** 2
        errs += np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])
        k = int(np.argmin(errs))
        return math.sqrt(errs[k]) / xnorm, k
    if rule.name == "plain":
        if config.param(rule, "delta") == "sample":
            delta = math.sqrt(float(np.sum(summary.s2)) / n)
        else:
            delta = 1.0 / math.sqrt(n)
        outcome = stopping.plain_discrepancy(summary.mean, delta, m, config.param(rule, "tau"))
    elif rule.name == "known_p":
        outcome = stopping.run_known_p(summary, config.param(rule, "p_known"),
                                       config.param(rule, "eps_known"), m,
                                       config.param(rule, "tau"))
    else:
        outcome = stopping.run_algorithm1(summary, problem.sigma, eps1,
                                          config.param(rule, "eps2"),
                                          config.param(rule, "tau"))
    est = cutoff_estimate(mean, problem.sigma, outcome.k)
    return relative_error(est, problem.xhat), outcome.k


def _run_cell(config, rule, n, rep) -> Replication:
    try:
        err, k = run_replication(config, n, rule, rep)
        return Replication(rule.label, n, rep, float(err), int(k))
    except (SpecstopError, ArithmeticError, ValueError) as exc:
        log.error("cell %s n=%d rep=%d failed: %s", rule.label, n, rep, exc)
        return Replication(rule.label, n, rep, float("nan"), -1, error=f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------- aggregation

@dataclass(frozen=True)
class RiskRow:
    rule: str
    n: int
    R: int
    median_err: float
    q25: float
    q75: float
    min: float
    max: float
    mean_k: float
    seed: int


@dataclass
class RiskTable:
    rows: List[RiskRow] = field(default_factory=list)
    raw: List[Replication] = field(default_factory=list)

    def row(self, rule: str, n: int) -> RiskRow:
        for r in self.rows:
            if r.rule == rule and r.n == n:
                return r
        raise KeyError((rule, n))

    def medians(self, rule: str) -> List[float]:
        return [r.median_err for r in sorted(self.rows, key=lambda r: r.n) if r.rule == rule]


def nearest_rank(sorted_values, q: float):
    """Nearest-rank quantile: element ceil(q R) (1-based), at least the first."""
    idx = max(1, math.ceil(q * len(sorted_values) - 1e-12))
    return sorted_values[idx - 1]


def aggregate(reps: List[Replication], rule: str, n: int, seed: int) -> RiskRow:
    errs = sorted(r.rel_err for r in reps)
    return RiskRow(rule=rule, n=n, R=len(errs), median_err=nearest_rank(errs, 0.5),
                   q25=nearest_rank(errs, 0.25), q75=nearest_rank(errs, 0.75),
                   min=errs[0], max=errs[-1],
                   mean_k=float(np.mean([r.k for r in reps])), seed=seed)


def _build_table(config, rules, results) -> RiskTable:
    table = RiskTable(raw=list(results))
    R = config.replications
    i = 0
    for rule in rules:
        for n in config.n_list:
            cell = results[i:i + R]
            i += R
            if len(cell) == R and all(r.error is None for r in cell):
                table.rows.append(aggregate(cell, rule.label, n, config.master_seed))
    table.rows.sort(key=lambda r: (r.rule, r.n))
    return table


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None,
                   partial_dump=None) -> RiskTable:
    """Run every (rule, n, rep) cell and aggregate per (rule, n).

    A failing cell aborts the run with ExperimentError; completed cells are
    written to ``partial_dump`` (a CSV path) when given.
    """
    threads = config.threads if threads is None else threads
    rules = config.expanded_rules()
    # build shared state once before threads start
    config.spectral_problem, config.noise_model, config.true_variances
    cells = [(rule, n, rep) for rule in rules for n in config.n_list
             for rep in range(config.replications)]
    if threads <= 1:
        results = [_run_cell(config, *c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_cell(config, *c), cells))
    failed = [r for r in results if r.error is not None]
    table = _build_table(config, rules, results)
    if failed:
        if partial_dump is not None:
            write_raw(results, partial_dump)
        first = failed[0]
        raise ExperimentError(f"{len(failed)} cell(s) failed; first: {first.rule} n={first.n} "
                              f"rep={first.rep}: {first.error}", table=table)
    return table


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def raw_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_raw{path.suffix or '.csv'}")


def write_raw(reps, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = RAW_HEADER + (["error"] if any(r.error for r in reps) else [])
        w.writerow(header)
        for r in sorted(reps, key=lambda r: (r.rule, r.n, r.rep)):
            row = [r.rule, r.n, r.rep, _fmt(r.rel_err), r.k]
            if len(header) > len(RAW_HEADER):
                row.append(r.error or "")
            w.writerow(row)


def emit_csv(table: RiskTable, path) -> None:
    """Write the summary table and the per-replication companion ``*_raw.csv``."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_HEADER)
            for r in sorted(table.rows, key=lambda r: (r.rule, r.n)):
                w.writerow([r.rule, r.n, r.R, _fmt(r.median_err), _fmt(r.q25), _fmt(r.q75),
                            _fmt(r.min), _fmt(r.max), _fmt(r.mean_k), r.seed])
        write_raw(table.raw, raw_path(path))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_table(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
