"""Percentile-bootstrap engine: resample, refit the nuisances, extremize the
point estimate per resample, and take order-statistic quantiles of the
per-resample extrema.

Reproducibility contract: the indices of resample ``b`` (at retry ``r``)
depend only on ``(seed, b, r)`` through a counter-based generator, and results
are reduced by resample index, so a run is bit-identical for a fixed seed
regardless of the worker count or scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfidenceReport,
    Error,
    EstimandKind,
    Method,
    ObservationTable,
    SensitivitySpec,
    Target,
    ValidationError,
    partition_by_arm,
)
from .estimators import _compute_interval, _context_fits, _OutcomeFits, make_context
from .glm import FitError, fit_logistic, fit_ols

__all__ = [
    "BootstrapConfig",
    "ResampleFailureError",
    "empirical_quantile",
    "resample_rng",
    "resample_indices",
    "percentile_bootstrap",
    "percentile_bootstrap_sweep",
]

_MASK64 = (1 << 64) - 1
_TAG_RESAMPLE = 0xB001


class ResampleFailureError(Error):
    """Some resample exhausted its retry budget during nuisance refits."""

    def __init__(self, message: str, n_failed: int, n_retried: int):
        super().__init__(message)
        self.n_failed = n_failed
        self.n_retried = n_retried


@dataclass(frozen=True)
class BootstrapConfig:
    """Knobs of the percentile bootstrap; defaults follow the reference
    workflow (B = 1000 resamples, 90% intervals)."""

    B: int = 1000
    alpha: float = 0.1
    seed: int = 0
    max_retries_per_resample: int = 10
    workers: int = 0  # 0 = one worker per available CPU

    def __post_init__(self) -> None:
        if self.B < 2:
            raise ValidationError("B must be at least 2")
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError("alpha must lie in (0, 1)")
        if self.max_retries_per_resample < 0:
            raise ValidationError("max_retries_per_resample must be >= 0")
        if self.workers < 0:
            raise ValidationError("workers must be >= 0")


def empirical_quantile(values, p: float) -> float:
    """Order-statistic quantile: the smallest value t with P_hat(x <= t) >= p.

    No interpolation; with B values this is the ceil(p*B)-th order statistic
    (floating-point error in p*B is corrected so the inf definition holds
    exactly).
    """
    arr = np.sort(np.asarray(values, dtype=float))
    B = arr.shape[0]
    if B == 0:
        raise ValueError("values must be nonempty")
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    k = math.ceil(p * B)
    if k > 1 and (k - 1) >= p * B:
        k -= 1
    k = min(max(k, 1), B)
    return float(arr[k - 1])


def resample_rng(seed: int, b: int, retry: int = 0) -> np.random.Generator:
    """Counter-based generator for resample ``b`` at redraw ``retry``.

    Distinct (seed, b, retry) triples give non-overlapping Philox streams, so
    any worker can regenerate any resample independently.
    """
    key = [seed & _MASK64, 0x5EED5EED5EED5EED]
    counter = [0, retry & _MASK64, b & _MASK64, _TAG_RESAMPLE]
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def resample_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform draws with replacement from range(n)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return rng.integers(0, n, size=n)


def _refit(table: ObservationTable, kind: EstimandKind, counts: np.ndarray, start=None):
    """Refit nuisances on a resample expressed as row multiplicities."""
    propensity = fit_logistic(
        table.x, table.a, case_weights=counts, check_rank=False, start=start
    )
    fits = _OutcomeFits()
    if kind.method is Method.SAIPW:
        obs = table.a == 1
        if kind.target in (Target.MEAN_RESPONSE, Target.NONRESPONDENT_MEAN):
            fits = _OutcomeFits(single=fit_ols(table.x, table.y, obs, counts))
        elif kind.target is Target.ATE:
            fits = _OutcomeFits(
                treated=fit_ols(table.x, table.y, obs, counts),
                control=fit_ols(table.x, table.y, ~obs, counts),
            )
        else:
            fits = _OutcomeFits(control=fit_ols(table.x, table.y, ~obs, counts))
    return propensity, fits


def _run_range(
    table: ObservationTable,
    kind: EstimandKind,
    specs: tuple[SensitivitySpec, ...],
    seed: int,
    max_retries: int,
    b_lo: int,
    b_hi: int,
):
    """Extremize resamples b_lo..b_hi-1. Returns (lows, highs, retried, failed)."""
    orders = partition_by_arm(table)
    n = table.n
    nspec = len(specs)
    warm = fit_logistic(table.x, table.a).beta  # resample refits start here
    lows = np.empty((b_hi - b_lo, nspec))
    highs = np.empty((b_hi - b_lo, nspec))
    retried = 0
    failed = 0
    for b in range(b_lo, b_hi):
        done = False
        for r in range(max_retries + 1):
            idx = resample_indices(n, resample_rng(seed, b, r))
            counts = np.bincount(idx, minlength=n).astype(float)
            try:
                propensity, fits = _refit(table, kind, counts, start=warm)
            except FitError:
                if r < max_retries:
                    retried += 1
                continue
            g = propensity.linear_predictors
            for j, spec in enumerate(specs):
                interval = _compute_interval(table, g, spec, kind, fits, counts, orders)
                lows[b - b_lo, j] = interval.lo
                highs[b - b_lo, j] = interval.hi
            done = True
            break
        if not done:
            failed += 1
            lows[b - b_lo, :] = np.nan
            highs[b - b_lo, :] = np.nan
    return lows, highs, retried, failed


def _resolve_workers(workers: int) -> int:
    if workers > 0:
        return workers
    return os.cpu_count() or 1


def percentile_bootstrap_sweep(
    table: ObservationTable,
    kind: EstimandKind,
    specs,
    config: BootstrapConfig,
) -> list[ConfidenceReport]:
    """Run one bootstrap and report a confidence interval per sensitivity
    bound in ``specs`` (the resamples and nuisance refits are shared: they do
    not depend on the bound, so each report is bit-identical to a single-bound
    run with the same seed)."""
    specs = tuple(specs)
    if not specs:
        raise ValidationError("need at least one sensitivity bound")
    if not isinstance(kind, EstimandKind):
        raise ValidationError(f"unsupported estimand {kind!r}")

    ctx = make_context(table, specs[0], kind)
    orders = partition_by_arm(table)
    fits = _context_fits(ctx, kind)
    g = ctx.propensity.linear_predictors
    points = [
        _compute_interval(table, g, spec, kind, fits, None, orders) for spec in specs
    ]

    B = config.B
    workers = _resolve_workers(config.workers)
    args = (table, kind, specs, config.seed, config.max_retries_per_resample)
    if workers > 1 and B >= 2 * workers:
        edges = np.linspace(0, B, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_range, *args, int(lo), int(hi))
                for lo, hi in zip(edges[:-1], edges[1:])
                if hi > lo
            ]
            parts = [f.result() for f in futures]
        lows = np.vstack([p[0] for p in parts])
        highs = np.vstack([p[1] for p in parts])
        retried = sum(p[2] for p in parts)
        failed = sum(p[3] for p in parts)
    else:
        lows, highs, retried, failed = _run_range(*args, 0, B)

    if failed:
        raise ResampleFailureError(
            f"{failed} of {B} resamples failed nuisance refits even after "
            f"{config.max_retries_per_resample} redraws each ({retried} redraws total)",
            n_failed=failed,
            n_retried=retried,
        )

    reports = []
    for j, (spec, point) in enumerate(zip(specs, points)):
        lo_trace = lows[:, j].copy()
        hi_trace = highs[:, j].copy()
        lo_trace.setflags(write=False)
        hi_trace.setflags(write=False)
        reports.append(
            ConfidenceReport(
                L=empirical_quantile(lo_trace, config.alpha / 2),
                U=empirical_quantile(hi_trace, 1 - config.alpha / 2),
                alpha=config.alpha,
                B=B,
                point_interval=point,
                n_retried=retried,
                n_failed=0,
                seed=config.seed,
                lows=lo_trace,
                highs=hi_trace,
            )
        )
    return reports


def percentile_bootstrap(
    table: ObservationTable,
    kind: EstimandKind,
    spec: SensitivitySpec,
    config: BootstrapConfig,
) -> ConfidenceReport:
    """Percentile-bootstrap confidence interval for one estimand under one
    sensitivity bound. See :func:`percentile_bootstrap_sweep` for several
    bounds at once."""
    return percentile_bootstrap_sweep(table, kind, (spec,), config)[0]
