"""Monte Carlo study for the mean-response problem with a misspecified
selection model: data generation on a discrete covariate grid, the population
KL projection of the working logistic model, the population partially
identified interval, and the coverage study that scores bootstrap intervals
against it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bootstrap import BootstrapConfig, _MASK64, percentile_bootstrap
from .core import (
    EstimandKind,
    Method,
    Mode,
    ObservationTable,
    PointInterval,
    SensitivitySpec,
    Target,
    ValidationError,
    validate_table,
)
from .extrema import FractionalProblem, threshold_extremum
from .glm import fit_logistic

__all__ = [
    "DEFAULT_SUPPORT",
    "SimSetting",
    "PopulationModel",
    "CoverageResult",
    "generate_dataset",
    "kl_projection",
    "population_model",
    "population_interval",
    "coverage_study",
]

# symmetric 11-point covariate grid (uniform weights), so E[Y] = 1/2 exactly
DEFAULT_SUPPORT = (-2.5, -1.28, -0.54, -0.16, -0.02, 0.0, 0.02, 0.16, 0.54, 1.28, 2.5)

_TAG_DATASET = 0xDA7A


def _expit(t):
    return 1.0 / (1.0 + np.exp(-np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class SimSetting:
    """One simulation configuration.

    The covariate is uniform on ``support``; the binary outcome follows
    ``logit P(Y=1|X=x) = -beta_y * x`` and the response indicator follows
    ``logit P(A=1|X=x) = beta_a * x + 0.1 * x^2``. The working selection
    model fitted by the procedure is logistic in x alone (intercept and
    slope), so it is misspecified through the quadratic term.
    """

    beta_a: float
    beta_y: float
    n: int = 200
    support: tuple[float, ...] = DEFAULT_SUPPORT

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValidationError("n must be at least 2")
        pts = np.asarray(self.support, dtype=float)
        if pts.size < 2:
            raise ValidationError("support needs at least two points")
        if not np.allclose(np.sort(pts), np.sort(-pts), atol=1e-12):
            raise ValidationError("support must be symmetric about zero")

    def selection_prob(self, x) -> np.ndarray:
        return _expit(self.beta_a * np.asarray(x) + 0.1 * np.asarray(x) ** 2)

    def outcome_prob(self, x) -> np.ndarray:
        return _expit(-self.beta_y * np.asarray(x))


@dataclass(frozen=True)
class PopulationModel:
    """Population cells (x, y) with joint observed mass P(X=x, Y=y, A=1) and
    the KL-projected working coefficients (intercept, slope)."""

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    selection: np.ndarray = field(repr=False)
    beta0: np.ndarray


def dataset_rng(seed: int) -> np.random.Generator:
    """Generator used for one replication's dataset draw."""
    key = [seed & _MASK64, 0xD0D0D0D0D0D0D0D0]
    return np.random.Generator(np.random.Philox(counter=[0, 0, 0, _TAG_DATASET], key=key))


def generate_dataset(setting: SimSetting, rng: np.random.Generator) -> ObservationTable:
    """Sample one dataset (missing-data mode; outcomes generated complete).

    Draw order is fixed (covariate index, outcome, indicator) so a given
    generator state maps to exactly one dataset.
    """
    pts = np.asarray(setting.support, dtype=float)
    x = pts[rng.integers(0, pts.size, size=setting.n)]
    y = (rng.random(setting.n) < setting.outcome_prob(x)).astype(float)
    a = (rng.random(setting.n) < setting.selection_prob(x)).astype(np.int8)
    return validate_table(a, x[:, None], y, Mode.MISSING_DATA)


def kl_projection(setting: SimSetting) -> np.ndarray:
    """Coefficients (intercept, slope) of the logistic model in x closest to
    the true selection probability in KL divergence, computed exactly as a
    weighted MLE over the support points."""
    pts = np.asarray(setting.support, dtype=float)
    p_x = np.full(pts.size, 1.0 / pts.size)
    e0 = setting.selection_prob(pts)
    x2 = np.concatenate([pts, pts])[:, None]
    a2 = np.concatenate([np.ones(pts.size), np.zeros(pts.size)])
    w2 = np.concatenate([p_x * e0, p_x * (1.0 - e0)])
    fit = fit_logistic(x2, a2, case_weights=w2)
    return np.asarray(fit.beta)


def population_model(setting: SimSetting) -> PopulationModel:
    pts = np.asarray(setting.support, dtype=float)
    p_x = np.full(pts.size, 1.0 / pts.size)
    e0 = setting.selection_prob(pts)
    p_y1 = setting.outcome_prob(pts)
    xs, ys, masses, sel = [], [], [], []
    for yval in (1.0, 0.0):
        xs.append(pts)
        ys.append(np.full(pts.size, yval))
        masses.append(p_x * np.where(yval == 1.0, p_y1, 1.0 - p_y1) * e0)
        sel.append(e0)
    return PopulationModel(
        x=np.concatenate(xs),
        y=np.concatenate(ys),
        mass=np.concatenate(masses),
        selection=np.concatenate(sel),
        beta0=kl_projection(setting),
    )


def population_interval(setting: SimSetting, lam: float) -> PointInterval:
    """Partially identified interval of the mean response at the population
    level: the weighted fractional problem over the finite (x, y) cells, with
    deviations measured against the KL-projected working model."""
    if lam < 0:
        raise ValidationError("lam must be nonnegative")
    pop = population_model(setting)
    g0 = pop.beta0[0] + pop.beta0[1] * pop.x
    order = np.argsort(-pop.y, kind="stable")
    problem = FractionalProblem(
        y=pop.y[order],
        w=np.exp(-g0[order]),
        Lambda=math.exp(lam),
        cell_weights=pop.mass[order],
    )
    lo = threshold_extremum(problem, "min")
    hi = threshold_extremum(problem, "max")
    return PointInterval(lo.value, hi.value, lo.threshold_a, hi.threshold_a)


@dataclass(frozen=True)
class CoverageResult:
    """Outcome of one (setting, lam) coverage cell."""

    setting: SimSetting
    lam: float
    reps: int
    noncoverage: float
    population: PointInterval
    median_point: tuple[float, float]
    median_ci: tuple[float, float]


def _rep_seed(master_seed: int, rep: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed & _MASK64, spawn_key=(rep,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_rep(setting: SimSetting, lam: float, config: BootstrapConfig, rep: int):
    seed = _rep_seed(config.seed, rep)
    table = generate_dataset(setting, dataset_rng(seed))
    rep_config = replace(config, seed=seed, workers=1)
    report = percentile_bootstrap(
        table,
        EstimandKind(Target.MEAN_RESPONSE, Method.SIPW),
        SensitivitySpec(lam),
        rep_config,
    )
    return (
        report.point_interval.lo,
        report.point_interval.hi,
        report.L,
        report.U,
    )


def _run_rep_range(setting, lam, config, lo, hi):
    return [_run_rep(setting, lam, config, rep) for rep in range(lo, hi)]


def coverage_study(
    setting: SimSetting, lam: float, reps: int, config: BootstrapConfig
) -> CoverageResult:
    """Monte Carlo coverage of the bootstrap interval, scored against the
    population partially identified interval (an interval counts as covering
    only if it contains both endpoints). Also reports the endpoint-wise
    median point interval and median confidence interval across replications.
    """
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    pop = population_interval(setting, lam)

    workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
    if workers > 1 and reps >= 2 * workers:
        edges = np.linspace(0, reps, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_rep_range, setting, lam, config, int(lo), int(hi))
                for lo, hi in zip(edges[:-1], edges[1:])
                if hi > lo
            ]
            rows = [row for f in futures for row in f.result()]
    else:
        rows = _run_rep_range(setting, lam, config, 0, reps)

    arr = np.asarray(rows)  # columns: point lo, point hi, ci lo, ci hi
    covered = (arr[:, 2] <= pop.lo) & (pop.hi <= arr[:, 3])
    return CoverageResult(
        setting=setting,
        lam=lam,
        reps=reps,
        noncoverage=float(np.mean(~covered)),
        population=pop,
        median_point=(float(np.median(arr[:, 0])), float(np.median(arr[:, 1]))),
        median_ci=(float(np.median(arr[:, 2])), float(np.median(arr[:, 3]))),
    )
