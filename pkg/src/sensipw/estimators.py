"""Stabilized IPW and stabilized-augmented IPW point estimates and their
exact extremization into point-estimate intervals, per estimand.

Every estimand reduces to one or two fractional problems over an arm of the
data; this module builds those problems (choosing the odds-factor sign, the
unit-term flag and the augmentation residuals) and delegates the actual
optimization to :mod:`sensipw.extrema`. The same construction is reused by
the bootstrap engine with per-resample row multiplicities, so the outcome
sort from :func:`sensipw.core.partition_by_arm` happens once per dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ArmOrder,
    EstimandKind,
    Method,
    ObservationTable,
    PointInterval,
    SensitivitySpec,
    Target,
    ValidationError,
    partition_by_arm,
)
from .extrema import (
    ExtremumResult,
    FractionalProblem,
    lipschitz_extremum,
    threshold_extremum,
)
from .glm import LinearFit, LogisticFit, fit_logistic, fit_ols

__all__ = [
    "EstimatorContext",
    "make_context",
    "sipw_at",
    "mean_response_interval",
    "nonrespondent_mean_interval",
    "ate_interval",
    "att_interval",
    "saipw_interval",
    "point_interval",
]


@dataclass(frozen=True)
class EstimatorContext:
    """Dataset plus fitted nuisances plus the sensitivity bound.

    ``outcome_fit`` carries the single outcome regression used by the
    missing-data estimands; ``outcome_pair`` carries (treated-arm fit,
    control-arm fit) for the observational ones. Either may be None when the
    estimator family does not need it.
    """

    table: ObservationTable
    propensity: LogisticFit
    spec: SensitivitySpec
    outcome_fit: LinearFit | None = None
    outcome_pair: tuple[LinearFit | None, LinearFit | None] | None = None


def make_context(
    table: ObservationTable, spec: SensitivitySpec, kind: EstimandKind
) -> EstimatorContext:
    """Fit the nuisance models an estimand needs and bundle them."""
    _check_arms(table, kind)
    propensity = fit_logistic(table.x, table.a)
    outcome_fit = None
    outcome_pair = None
    if kind.method is Method.SAIPW:
        if kind.target in (Target.MEAN_RESPONSE, Target.NONRESPONDENT_MEAN):
            outcome_fit = fit_ols(table.x, table.y, table.a == 1)
        elif kind.target is Target.ATE:
            outcome_pair = (
                fit_ols(table.x, table.y, table.a == 1),
                fit_ols(table.x, table.y, table.a == 0),
            )
        else:  # ATT augments only the control-arm term
            outcome_pair = (None, fit_ols(table.x, table.y, table.a == 0))
    return EstimatorContext(table, propensity, spec, outcome_fit, outcome_pair)


def _check_arms(table: ObservationTable, kind: EstimandKind) -> None:
    if kind.mode is not table.mode:
        raise ValidationError(
            f"estimand {kind.target.value} expects a {kind.mode.value} table, "
            f"got {table.mode.value}"
        )
    if kind.needs_both_arms and table.n_unobserved == 0:
        raise ValidationError(
            f"estimand {kind.target.value} needs both indicator arms, "
            "but every row has indicator 1"
        )


def sipw_at(ctx: EstimatorContext, z) -> float:
    """Stabilized IPW mean-response estimate at a fixed multiplier vector.

    ``z`` is indexed over the indicator-1 rows in their original row order.
    """
    obs = ctx.table.a == 1
    z = np.asarray(z, dtype=float)
    if z.shape != (int(np.sum(obs)),):
        raise ValueError("z must have one entry per observed row")
    Lam = ctx.spec.Lambda
    if np.any(z < (1 / Lam) * (1 - 1e-9)) or np.any(z > Lam * (1 + 1e-9)):
        raise ValueError("z outside [1/Lambda, Lambda]")
    w = np.exp(-ctx.propensity.linear_predictors[obs])
    mass = 1.0 + z * w
    return float(np.dot(ctx.table.y[obs], mass) / np.sum(mass))


# ---------------------------------------------------------------------------
# interval machinery (shared with the bootstrap engine)


@dataclass(frozen=True)
class _OutcomeFits:
    single: LinearFit | None = None
    treated: LinearFit | None = None
    control: LinearFit | None = None


def _wmean(values: np.ndarray, idx: np.ndarray, counts: np.ndarray | None) -> float:
    if counts is None:
        return float(np.mean(values[idx]))
    c = counts[idx]
    total = float(np.sum(c))
    if total <= 0:
        raise ValidationError("resample has no mass on a required arm")
    return float(np.dot(values[idx], c) / total)


def _arm_problem(
    table: ObservationTable,
    gvec: np.ndarray,
    order: np.ndarray,
    counts: np.ndarray | None,
    *,
    w_sign: float,
    unit_term: bool,
    Lambda: float,
    resid_fitted: np.ndarray | None = None,
):
    """Build one fractional problem over the rows listed in ``order`` (already
    outcome-sorted descending). Returns the problem and the matching
    (covariate, outcome) rows for the Lipschitz route."""
    idx = order
    cells: np.ndarray | None = None
    if counts is not None:
        c = counts[idx]
        keep = c > 0
        idx = idx[keep]
        cells = c[keep].astype(float)
    if idx.size == 0:
        raise ValidationError("resample has no rows on a required arm")
    values = table.y[idx]
    if resid_fitted is not None:
        values = values - resid_fitted[idx]
        # augmentation reorders the objective: sort by residual, descending
        reorder = np.argsort(-values, kind="stable")
        idx = idx[reorder]
        values = values[reorder]
        if cells is not None:
            cells = cells[reorder]
    w = np.exp(w_sign * gvec[idx])
    problem = FractionalProblem(values, w, Lambda, cells, unit_term)
    return problem, idx


def _ordered(lo: float, hi: float) -> tuple[float, float]:
    """Collapse ulp-level inversions of the two extremizations (they happen
    when the problem is degenerate, e.g. constant outcomes); anything beyond
    rounding noise is a solver bug and must surface."""
    if lo > hi:
        if lo - hi > 1e-9 * max(1.0, abs(lo), abs(hi)):
            raise AssertionError(f"extrema out of order beyond rounding: {lo} > {hi}")
        lo, hi = hi, lo
    return lo, hi


def _extremize(
    problem: FractionalProblem,
    idx: np.ndarray,
    table: ObservationTable,
    spec: SensitivitySpec,
    direction: str,
) -> ExtremumResult:
    if spec.lipschitz is None:
        return threshold_extremum(problem, direction)
    rows = np.column_stack([table.x[idx], table.y[idx]])
    return lipschitz_extremum(
        problem, rows, spec.lipschitz.L, spec.lipschitz.metric, direction
    )


def _compute_interval(
    table: ObservationTable,
    gvec: np.ndarray,
    spec: SensitivitySpec,
    kind: EstimandKind,
    fits: _OutcomeFits,
    counts: np.ndarray | None,
    orders: ArmOrder,
) -> PointInterval:
    """Point-estimate interval for one estimand, optionally under resample
    multiplicities. This is the single implementation behind all public
    interval functions and the bootstrap engine."""
    Lam = spec.Lambda
    saipw = kind.method is Method.SAIPW
    target = kind.target

    if target is Target.MEAN_RESPONSE:
        resid = fits.single.fitted if saipw else None
        offset = _wmean(fits.single.fitted, np.arange(table.n), counts) if saipw else 0.0
        prob, idx = _arm_problem(
            table, gvec, orders.observed, counts,
            w_sign=-1.0, unit_term=True, Lambda=Lam, resid_fitted=resid,
        )
        lo_r = _extremize(prob, idx, table, spec, "min")
        hi_r = _extremize(prob, idx, table, spec, "max")
        lo, hi = _ordered(offset + lo_r.value, offset + hi_r.value)
        return PointInterval(lo, hi, lo_r.threshold_a, hi_r.threshold_a)

    if target is Target.NONRESPONDENT_MEAN:
        if table.n_unobserved == 0:
            raise ValidationError("non-respondent mean needs at least one indicator-0 row")
        resid = fits.single.fitted if saipw else None
        offset = _wmean(fits.single.fitted, orders.unobserved, counts) if saipw else 0.0
        prob, idx = _arm_problem(
            table, gvec, orders.observed, counts,
            w_sign=-1.0, unit_term=False, Lambda=Lam, resid_fitted=resid,
        )
        lo_r = _extremize(prob, idx, table, spec, "min")
        hi_r = _extremize(prob, idx, table, spec, "max")
        lo, hi = _ordered(offset + lo_r.value, offset + hi_r.value)
        return PointInterval(lo, hi, lo_r.threshold_a, hi_r.threshold_a)

    if target is Target.ATE:
        resid1 = fits.treated.fitted if saipw else None
        resid0 = fits.control.fitted if saipw else None
        all_rows = np.arange(table.n)
        off1 = _wmean(fits.treated.fitted, all_rows, counts) if saipw else 0.0
        off0 = _wmean(fits.control.fitted, all_rows, counts) if saipw else 0.0
        tprob, tidx = _arm_problem(
            table, gvec, orders.observed, counts,
            w_sign=-1.0, unit_term=True, Lambda=Lam, resid_fitted=resid1,
        )
        cprob, cidx = _arm_problem(
            table, gvec, orders.unobserved, counts,
            w_sign=+1.0, unit_term=True, Lambda=Lam, resid_fitted=resid0,
        )
        t_lo = _extremize(tprob, tidx, table, spec, "min")
        t_hi = _extremize(tprob, tidx, table, spec, "max")
        c_lo = _extremize(cprob, cidx, table, spec, "min")
        c_hi = _extremize(cprob, cidx, table, spec, "max")
        lo, hi = _ordered(
            (off1 + t_lo.value) - (off0 + c_hi.value),
            (off1 + t_hi.value) - (off0 + c_lo.value),
        )
        return PointInterval(lo, hi, t_lo.threshold_a, t_hi.threshold_a)

    if target is Target.ATT:
        first = _wmean(table.y, np.flatnonzero(table.a == 1), counts)
        resid0 = fits.control.fitted if saipw else None
        off0 = (
            _wmean(fits.control.fitted, np.flatnonzero(table.a == 1), counts)
            if saipw
            else 0.0
        )
        cprob, cidx = _arm_problem(
            table, gvec, orders.unobserved, counts,
            w_sign=+1.0, unit_term=False, Lambda=Lam, resid_fitted=resid0,
        )
        c_lo = _extremize(cprob, cidx, table, spec, "min")
        c_hi = _extremize(cprob, cidx, table, spec, "max")
        lo, hi = _ordered(first - off0 - c_hi.value, first - off0 - c_lo.value)
        return PointInterval(lo, hi, c_hi.threshold_a, c_lo.threshold_a)

    raise ValidationError(f"unsupported estimand target {target!r}")


def _context_fits(ctx: EstimatorContext, kind: EstimandKind) -> _OutcomeFits:
    if kind.method is Method.SIPW:
        return _OutcomeFits()
    if kind.target in (Target.MEAN_RESPONSE, Target.NONRESPONDENT_MEAN):
        if ctx.outcome_fit is None:
            raise ValidationError("SAIPW needs an outcome regression in the context")
        return _OutcomeFits(single=ctx.outcome_fit)
    if ctx.outcome_pair is None:
        raise ValidationError("SAIPW ATE/ATT needs per-arm outcome regressions")
    treated, control = ctx.outcome_pair
    if kind.target is Target.ATE and (treated is None or control is None):
        raise ValidationError("SAIPW ATE needs outcome fits for both arms")
    if kind.target is Target.ATT and control is None:
        raise ValidationError("SAIPW ATT needs a control-arm outcome fit")
    return _OutcomeFits(treated=treated, control=control)


def point_interval(ctx: EstimatorContext, kind: EstimandKind) -> PointInterval:
    """Point-estimate interval of the requested estimand over the whole
    sensitivity model."""
    _check_arms(ctx.table, kind)
    orders = partition_by_arm(ctx.table)
    return _compute_interval(
        ctx.table,
        ctx.propensity.linear_predictors,
        ctx.spec,
        kind,
        _context_fits(ctx, kind),
        None,
        orders,
    )


def mean_response_interval(ctx: EstimatorContext) -> PointInterval:
    return point_interval(ctx, EstimandKind(Target.MEAN_RESPONSE, Method.SIPW))


def nonrespondent_mean_interval(ctx: EstimatorContext) -> PointInterval:
    return point_interval(ctx, EstimandKind(Target.NONRESPONDENT_MEAN, Method.SIPW))


def ate_interval(ctx: EstimatorContext) -> PointInterval:
    return point_interval(ctx, EstimandKind(Target.ATE, Method.SIPW))


def att_interval(ctx: EstimatorContext) -> PointInterval:
    return point_interval(ctx, EstimandKind(Target.ATT, Method.SIPW))


def saipw_interval(ctx: EstimatorContext, target: Target) -> PointInterval:
    return point_interval(ctx, EstimandKind(target, Method.SAIPW))
