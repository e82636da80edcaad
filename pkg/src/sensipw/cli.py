"""Command-line driver: CSV ingestion, sensitivity analysis and simulation
commands, JSON/CSV reports, solver cross-check utility, and SVG interval
plots.

The CLI itself is a thin single-threaded wrapper; parallelism lives inside
the bootstrap and simulation engines and is controlled by ``--workers`` (the
``SENSIPW_WORKERS`` environment variable is the fallback). Errors are written
to stderr as one JSON object and signalled with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .bootstrap import BootstrapConfig, percentile_bootstrap_sweep
from .core import (
    Error,
    EstimandKind,
    Method,
    Mode,
    SensitivitySpec,
    Target,
    ValidationError,
    validate_table,
)
from .extrema import (
    FractionalProblem,
    brute_force_extrema,
    charnes_cooper_lp,
    threshold_extremum,
)
from .simharness import SimSetting, coverage_study
from .svgplot import IntervalBar, render_interval_plot

__all__ = ["main", "cmd_analyze", "cmd_simulate", "cmd_oracle"]

SCHEMA_VERSION = 1

ANALYZE_COLUMNS = (
    "lambda",
    "Lambda",
    "point_lo",
    "point_hi",
    "ci_lo",
    "ci_hi",
    "B",
    "alpha",
    "n_retried",
)
SIMULATE_COLUMNS = (
    "beta_A",
    "beta_Y",
    "lambda",
    "Lambda",
    "noncoverage",
    "pop_lo",
    "pop_hi",
    "med_point_lo",
    "med_point_hi",
    "med_ci_lo",
    "med_ci_hi",
)


def _default_workers() -> int:
    env = os.environ.get("SENSIPW_WORKERS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ValidationError(f"SENSIPW_WORKERS must be an integer, got {env!r}") from exc
        if value < 0:
            raise ValidationError("SENSIPW_WORKERS must be >= 0")
        return value
    return 0


def _parse_lambdas(values: list[float]) -> list[float]:
    if not values:
        raise ValidationError("give at least one --lambda")
    if any(v < 0 for v in values):
        raise ValidationError("lambda values must be nonnegative")
    if sorted(values) != values or len(set(values)) != len(values):
        raise ValidationError("lambda values must be strictly increasing")
    return values


def _read_csv_table(path, outcome: str, indicator: str, covariates: list[str], mode: Mode):
    """Parse a CSV with a header row into arrays for validate_table.

    Empty outcome cells are permitted only on indicator-0 rows in
    missing-data mode (they become NaN and are ignored downstream).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        names = [h.strip() for h in header]
        missing = [c for c in (outcome, indicator, *covariates) if c not in names]
        if missing:
            raise ValidationError(f"{path}: columns not in header: {', '.join(missing)}")
        col = {name: names.index(name) for name in names}

        a_vals, y_vals, x_rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(names):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(names)} fields, got {len(row)}"
                )

            def cell(name: str) -> str:
                return row[col[name]].strip()

            def number(name: str) -> float:
                text = cell(name)
                try:
                    return float(text)
                except ValueError:
                    raise ValidationError(
                        f"{path}:{lineno}: column {name!r} is not numeric: {text!r}"
                    ) from None

            a_raw = number(indicator)
            if a_raw not in (0.0, 1.0):
                raise ValidationError(
                    f"{path}:{lineno}: column {indicator!r} must be 0 or 1, got {cell(indicator)!r}"
                )
            out_text = cell(outcome)
            if out_text == "":
                if mode is Mode.OBSERVATIONAL or a_raw == 1.0:
                    raise ValidationError(
                        f"{path}:{lineno}: outcome {outcome!r} is empty but required here"
                    )
                y_vals.append(math.nan)
            else:
                y_vals.append(number(outcome))
            a_vals.append(int(a_raw))
            x_rows.append([number(c) for c in covariates])

    if not a_vals:
        raise ValidationError(f"{path}: no data rows")
    return validate_table(np.array(a_vals), np.array(x_rows), np.array(y_vals), mode)


def _write_report(report: dict, columns, fmt: str, out_path) -> None:
    if fmt == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in report["rows"]:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
        text = buf.getvalue()
    if out_path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_analyze(args) -> dict:
    kind = EstimandKind(Target(args.estimand), Method(args.method))
    lambdas = _parse_lambdas(args.lambdas)
    covariates = [c.strip() for c in args.covariates.split(",") if c.strip()]
    if not covariates:
        raise ValidationError("--covariates must list at least one column")
    table = _read_csv_table(args.input, args.outcome, args.indicator, covariates, kind.mode)

    config = BootstrapConfig(
        B=args.bootstrap, alpha=args.alpha, seed=args.seed, workers=args.workers
    )
    specs = [SensitivitySpec(lam) for lam in lambdas]
    reports = percentile_bootstrap_sweep(table, kind, specs, config)

    rows = []
    for lam, rep in zip(lambdas, reports):
        rows.append(
            {
                "lambda": float(lam),
                "Lambda": math.exp(lam),
                "point_lo": rep.point_interval.lo,
                "point_hi": rep.point_interval.hi,
                "ci_lo": rep.L,
                "ci_hi": rep.U,
                "B": rep.B,
                "alpha": rep.alpha,
                "n_retried": rep.n_retried,
            }
        )
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "analyze",
        "estimand": args.estimand,
        "method": args.method,
        "n": table.n,
        "seed": args.seed,
        "rows": rows,
    }
    if args.plot:
        bars = [
            IntervalBar(
                label=f"{row['Lambda']:.2f}",
                point_lo=row["point_lo"],
                point_hi=row["point_hi"],
                ci_lo=row["ci_lo"],
                ci_hi=row["ci_hi"],
            )
            for row in rows
        ]
        svg = render_interval_plot(
            bars,
            title=f"{args.estimand.upper()} ({args.method.upper()})",
            xlabel="Lambda",
            ylabel="estimate",
        )
        with open(args.plot, "w", encoding="utf-8") as fh:
            fh.write(svg)
    _write_report(report, ANALYZE_COLUMNS, args.format, args.out)
    return report


def cmd_simulate(args) -> dict:
    lambdas = _parse_lambdas(args.lambdas)
    setting = SimSetting(args.beta_a, args.beta_y, n=args.n)
    config = BootstrapConfig(
        B=args.bootstrap, alpha=args.alpha, seed=args.seed, workers=args.workers
    )
    rows = []
    for lam in lambdas:
        res = coverage_study(setting, lam, args.reps, config)
        rows.append(
            {
                "beta_A": args.beta_a,
                "beta_Y": args.beta_y,
                "lambda": float(lam),
                "Lambda": math.exp(lam),
                "noncoverage": res.noncoverage,
                "pop_lo": res.population.lo,
                "pop_hi": res.population.hi,
                "med_point_lo": res.median_point[0],
                "med_point_hi": res.median_point[1],
                "med_ci_lo": res.median_ci[0],
                "med_ci_hi": res.median_ci[1],
            }
        )
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "reps": args.reps,
        "n": args.n,
        "B": args.bootstrap,
        "alpha": args.alpha,
        "seed": args.seed,
        "rows": rows,
    }
    _write_report(report, SIMULATE_COLUMNS, args.format, args.out)
    return report


def cmd_oracle(args) -> dict:
    """Cross-check the three extremization routes on one instance file."""
    with open(args.input, encoding="utf-8") as fh:
        inst = json.load(fh)
    for key in ("y", "w", "Lambda"):
        if key not in inst:
            raise ValidationError(f"{args.input}: instance needs key {key!r}")
    y = np.asarray(inst["y"], dtype=float)
    order = np.argsort(-y, kind="stable")
    cells = inst.get("cell_weights")
    problem = FractionalProblem(
        y=y[order],
        w=np.asarray(inst["w"], dtype=float)[order],
        Lambda=float(inst["Lambda"]),
        cell_weights=None if cells is None else np.asarray(cells, dtype=float)[order],
        unit_term=bool(inst.get("unit_term", True)),
    )
    brute = None
    if not args.skip_brute:
        brute = brute_force_extrema(problem, cap=args.brute_cap)
    rows = []
    discrepancy = 0.0
    for direction in ("min", "max"):
        thr = threshold_extremum(problem, direction)
        lp = charnes_cooper_lp(problem, direction)
        row = {"direction": direction, "threshold": thr.value, "lp": lp.value}
        candidates = [thr.value, lp.value]
        if brute is not None:
            row["brute_force"] = brute[0] if direction == "min" else brute[1]
            candidates.append(row["brute_force"])
        rows.append(row)
        discrepancy = max(discrepancy, max(candidates) - min(candidates))
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "oracle",
        "m": problem.m,
        "Lambda": problem.Lambda,
        "max_discrepancy": discrepancy,
        "rows": rows,
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return report


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensipw",
        description=(
            "Sensitivity analysis for stabilized IPW estimators: point-estimate "
            "intervals and percentile-bootstrap confidence intervals under "
            "odds-ratio-bounded selection deviations."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lambdas", type=float, action="append",
                        default=None, metavar="LAM",
                        help="log odds-ratio bound; repeat for several values")
    common.add_argument("--alpha", type=float, default=0.1,
                        help="two-sided miscoverage level (default 0.1)")
    common.add_argument("--bootstrap", type=int, default=1000, metavar="B",
                        help="number of bootstrap resamples (default 1000)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes; 0 = auto (default: "
                             "SENSIPW_WORKERS or auto)")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p_an = sub.add_parser("analyze", parents=[common],
                          help="sensitivity analysis of a CSV dataset")
    p_an.add_argument("--input", required=True, help="CSV file with a header row")
    p_an.add_argument("--estimand", required=True,
                      choices=tuple(t.value for t in Target))
    p_an.add_argument("--method", default="sipw",
                      choices=tuple(m.value for m in Method))
    p_an.add_argument("--outcome", required=True, help="outcome column name")
    p_an.add_argument("--indicator", required=True,
                      help="response/treatment indicator column name")
    p_an.add_argument("--covariates", required=True,
                      help="comma-separated covariate column names")
    p_an.add_argument("--plot", default=None, metavar="OUT.SVG",
                      help="write an interval-vs-Lambda SVG plot")
    p_an.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="Monte Carlo coverage study on synthetic data")
    p_sim.add_argument("--beta-a", type=float, required=True,
                       help="strength of the covariate-selection association")
    p_sim.add_argument("--beta-y", type=float, required=True,
                       help="strength of the covariate-outcome association")
    p_sim.add_argument("--reps", type=int, default=1000,
                       help="number of Monte Carlo replications")
    p_sim.add_argument("--n", type=int, default=200, help="sample size per replication")
    p_sim.set_defaults(func=cmd_simulate)

    p_or = sub.add_parser("oracle",
                          help="cross-check threshold scan, LP and brute force "
                               "on a JSON instance {y, w, Lambda, ...}")
    p_or.add_argument("--input", required=True)
    p_or.add_argument("--skip-brute", action="store_true",
                      help="skip the exhaustive enumeration")
    p_or.add_argument("--brute-cap", type=int, default=20,
                      help="refuse brute force above this size (default 20)")
    p_or.add_argument("--out", default=None)
    p_or.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "lambdas", None) is None and args.command in ("analyze", "simulate"):
            args.lambdas = [0.0]
        if getattr(args, "workers", None) is None and args.command in ("analyze", "simulate"):
            args.workers = _default_workers()
        args.func(args)
    except Error as exc:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stderr.write(json.dumps(payload) + "\n")
        return 1
    except OSError as exc:
        payload = {"error": {"type": "OSError", "message": str(exc)}}
        sys.stderr.write(json.dumps(payload) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
