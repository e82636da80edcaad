"""Domain types shared by every other module: validated observation tables,
sensitivity specifications, estimand descriptors, and result containers.

All types are immutable after construction (arrays are marked read-only) and
therefore safe to share across concurrent workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Error",
    "ValidationError",
    "Mode",
    "Target",
    "Method",
    "EstimandKind",
    "LipschitzSpec",
    "SensitivitySpec",
    "ObservationTable",
    "ArmOrder",
    "PointInterval",
    "ConfidenceReport",
    "validate_table",
    "partition_by_arm",
]


class Error(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(Error):
    """Raised when an input dataset violates a structural invariant."""


class Mode(enum.Enum):
    """Which rows are required to carry an outcome value."""

    MISSING_DATA = "missing-data"      # y required on indicator-1 rows only
    OBSERVATIONAL = "observational"    # y required on all rows


class Target(enum.Enum):
    MEAN_RESPONSE = "mean"
    NONRESPONDENT_MEAN = "mu0"
    ATE = "ate"
    ATT = "att"


class Method(enum.Enum):
    SIPW = "sipw"
    SAIPW = "saipw"


@dataclass(frozen=True)
class EstimandKind:
    """A target quantity paired with the estimator family used for it."""

    target: Target
    method: Method = Method.SIPW

    @property
    def mode(self) -> Mode:
        if self.target in (Target.MEAN_RESPONSE, Target.NONRESPONDENT_MEAN):
            return Mode.MISSING_DATA
        return Mode.OBSERVATIONAL

    @property
    def needs_outcome_model(self) -> bool:
        return self.method is Method.SAIPW

    @property
    def needs_both_arms(self) -> bool:
        return self.target is not Target.MEAN_RESPONSE


@dataclass(frozen=True)
class LipschitzSpec:
    """Optional smoothness restriction on the logit-scale deviation."""

    L: float
    metric: str = "scaled-euclidean"

    def __post_init__(self) -> None:
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValidationError("Lipschitz constant must be positive and finite")
        if self.metric != "scaled-euclidean":
            raise ValidationError(f"unsupported metric {self.metric!r}")


@dataclass(frozen=True)
class SensitivitySpec:
    """Bound on selection deviations: odds ratios confined to [1/Lambda, Lambda].

    ``lam`` is the log-scale bound, so ``Lambda = exp(lam)``; ``lam = 0``
    recovers the no-deviation (point-identified) analysis.
    """

    lam: float
    lipschitz: LipschitzSpec | None = None

    def __post_init__(self) -> None:
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValidationError("lam must be a finite nonnegative real")

    @property
    def Lambda(self) -> float:
        return math.exp(self.lam)


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ObservationTable:
    """Validated dataset of (indicator, covariates, outcome) rows.

    In missing-data mode the outcome may be NaN on indicator-0 rows (it is
    ignored there even if present); in observational mode every row needs a
    finite outcome. Construct through :func:`validate_table`.
    """

    a: np.ndarray
    x: np.ndarray
    y: np.ndarray
    mode: Mode

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_observed(self) -> int:
        return int(np.sum(self.a == 1))

    @property
    def n_unobserved(self) -> int:
        return int(np.sum(self.a == 0))


def validate_table(a, x, y, mode: Mode = Mode.MISSING_DATA) -> ObservationTable:
    """Validate raw arrays and return an immutable :class:`ObservationTable`.

    Raises :class:`ValidationError` on dimension mismatches, indicators
    outside {0, 1}, missing outcomes where the mode requires them, or a
    dataset without any indicator-1 row.
    """
    a_arr = np.asarray(a)
    if a_arr.ndim != 1:
        raise ValidationError("indicator must be a 1-d sequence")
    n = a_arr.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 rows, got {n}")
    if not np.all(np.isin(a_arr, (0, 1))):
        bad = np.argwhere(~np.isin(a_arr, (0, 1)))[0, 0]
        raise ValidationError(f"indicator must be 0 or 1 (row {bad} is {a_arr[bad]!r})")
    a_arr = a_arr.astype(np.int8)

    try:
        x_arr = np.asarray(x, dtype=float)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"covariate rows must be rectangular and numeric: {exc}") from exc
    if x_arr.ndim == 1:
        x_arr = x_arr[:, None]
    if x_arr.ndim != 2 or x_arr.shape[0] != n:
        raise ValidationError(
            f"covariate block must be n x d with n={n}, got shape {x_arr.shape}"
        )
    if x_arr.shape[1] < 1:
        raise ValidationError("need at least one covariate column")
    if not np.all(np.isfinite(x_arr)):
        bad = np.argwhere(~np.isfinite(x_arr))[0]
        raise ValidationError(f"covariate ({bad[0]}, {bad[1]}) is not finite")

    y_arr = np.asarray(y, dtype=float)
    if y_arr.shape != (n,):
        raise ValidationError(f"outcome must have shape ({n},), got {y_arr.shape}")

    if int(np.sum(a_arr == 1)) == 0:
        raise ValidationError("no rows with indicator 1: nothing is observed")

    required = y_arr[a_arr == 1] if mode is Mode.MISSING_DATA else y_arr
    if not np.all(np.isfinite(required)):
        where = "indicator-1 rows" if mode is Mode.MISSING_DATA else "all rows"
        raise ValidationError(f"outcome must be finite on {where}")

    return ObservationTable(_readonly(a_arr), _readonly(x_arr), _readonly(y_arr), mode)


@dataclass(frozen=True)
class ArmOrder:
    """Row permutations placing each arm's rows in descending outcome order.

    ``observed``/``unobserved`` hold original row indices. Ties keep the
    original row order (stable sort) so results are reproducible across runs
    and worker counts. Unobserved rows without outcome values are returned in
    original order. The concatenation of the two arrays is a permutation of
    ``range(n)``.
    """

    observed: np.ndarray
    unobserved: np.ndarray


def _stable_desc_order(idx: np.ndarray, y: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        return idx
    return idx[np.argsort(-y[idx], kind="stable")]


def partition_by_arm(table: ObservationTable) -> ArmOrder:
    """Split rows by indicator and sort each group by outcome, descending.

    The sort is performed once per dataset; extremization calls reuse the
    returned permutations (bootstrap resamples reuse them through index
    multiplicities, keeping per-resample work linear).
    """
    idx1 = np.flatnonzero(table.a == 1)
    idx0 = np.flatnonzero(table.a == 0)
    observed = _stable_desc_order(idx1, table.y)
    if idx0.size and np.all(np.isfinite(table.y[idx0])):
        unobserved = _stable_desc_order(idx0, table.y)
    else:
        unobserved = idx0
    return ArmOrder(_readonly(observed), _readonly(unobserved))


@dataclass(frozen=True)
class PointInterval:
    """Range of point estimates over the sensitivity model, with the
    threshold positions (in the sorted-outcome order) achieving each end."""

    lo: float
    hi: float
    lo_threshold: int = 0
    hi_threshold: int = 0

    def __post_init__(self) -> None:
        if not (self.lo <= self.hi):
            raise ValidationError(f"interval bounds out of order: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ConfidenceReport:
    """Percentile-bootstrap confidence interval plus per-resample traces."""

    L: float
    U: float
    alpha: float
    B: int
    point_interval: PointInterval
    n_retried: int
    n_failed: int
    seed: int
    lows: np.ndarray = field(repr=False)
    highs: np.ndarray = field(repr=False)
