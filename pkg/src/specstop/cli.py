"""Command-line entry point: ``specstop {run,rates,problem,selfcheck}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InvalidArgument, SpecstopError
from .experiment import ExperimentError, emit_csv, load_config, run_experiment
from .operators import deriv2_problem, export_problem, make_diagonal_problem
from .rates import SourceSpec, make_source_element, rate_table

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _cmd_run(args) -> int:
    config = load_config(args.config, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "risk_table.csv"
    try:
        table = run_experiment(config, partial_dump=out / "partial_raw.csv")
    except ExperimentError as exc:
        print(f"run aborted: {exc} (partial results in {out / 'partial_raw.csv'})",
              file=sys.stderr)
        return EXIT_FAILURE
    emit_csv(table, target)
    print(f"wrote {target}")
    return EXIT_OK


def _cmd_rates(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "q", "p", "nu", "rho", "branch", "rate"])
    for n, q, p, nu, rho, branch, rate in rate_table(args.n, args.q, args.p, args.nu, args.rho):
        w.writerow([f"{n:g}", f"{q:g}", f"{p:g}", f"{nu:g}", f"{rho:g}", branch, f"{rate:.6g}"])
    return EXIT_OK


def _cmd_problem(args) -> int:
    if args.kind == "deriv2":
        problem = deriv2_problem(args.m, args.case)
    else:
        j = np.arange(1, args.m + 1, dtype=float)
        sigma = args.scale * j ** (-args.q / 2)
        profile, _, param = args.source.partition(":")
        spec = SourceSpec(nu=args.nu, rho=args.rho, profile=profile,
                          param=float(param) if param else 10)
        problem = make_diagonal_problem(args.m, args.q, args.scale,
                                        make_source_element(sigma, spec))
    export_problem(problem, args.export)
    print(f"wrote {args.export} ({problem.m} components)")
    return EXIT_OK


def _cmd_selfcheck(args) -> int:
    from .selfcheck import run_all

    results = run_all(stream=sys.stdout)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specstop",
                                     description="Spectral cut-off with discrepancy-type stopping rules.")
    parser.add_argument("--version", action="version", version=f"specstop {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run a Monte Carlo experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--threads", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    rates = sub.add_parser("rates", help="print minimax rates for a parameter grid as CSV")
    for name, typ, default in (("n", float, None), ("q", float, None), ("p", float, None),
                               ("nu", float, [1.0]), ("rho", float, [1.0])):
        rates.add_argument(f"--{name}", type=typ, nargs="+", default=default,
                           required=default is None)
    rates.set_defaults(func=_cmd_rates)

    prob = sub.add_parser("problem", help="export a test problem as CSV")
    prob.add_argument("--kind", choices=("deriv2", "diagonal"), required=True)
    prob.add_argument("--m", type=int, required=True)
    prob.add_argument("--export", required=True)
    prob.add_argument("--case", type=int, default=1, choices=(1, 2, 3))
    prob.add_argument("--q", type=float, default=2.0)
    prob.add_argument("--scale", type=float, default=1.0)
    prob.add_argument("--source", default="flat:10")
    prob.add_argument("--nu", type=float, default=1.0)
    prob.add_argument("--rho", type=float, default=1.0)
    prob.set_defaults(func=_cmd_problem)

    check = sub.add_parser("selfcheck", help="run the fast invariant suite")
    check.set_defaults(func=_cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SpecstopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, (ConfigError, InvalidArgument)) else EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
