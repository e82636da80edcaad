"""Exact extremization of stabilized-weight fractional objectives over the
box of odds-ratio-bounded deviations.

The objective is a ratio of two linear functions of the per-row multipliers
``z_i`` confined to ``[1/Lambda, Lambda]``:

    f(z) = sum_i c_i * y_i * (u + z_i * w_i) / sum_i c_i * (u + z_i * w_i)

with ``u = 1`` for mean-response-type estimators and ``u = 0`` for the
non-respondent-mean family, optional cell weights ``c_i`` (population cells or
bootstrap multiplicities), and ``w_i`` the per-row propensity odds factor.

Three solvers are provided: a linear scan over outcome-sorted threshold
patterns (the production path, linear time after the one-time sort), a
Charnes-Cooper linear program solved with the dense simplex (cross-check, and
the only route once pairwise Lipschitz constraints are added), and a capped
brute-force vertex enumeration used as a debugging oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Error
from .simplex import SimplexError, solve_lp

__all__ = [
    "SizeCapError",
    "InternalSolverError",
    "FractionalProblem",
    "ExtremumResult",
    "evaluate_fractional",
    "threshold_extremum",
    "charnes_cooper_lp",
    "separable_ate_extremum",
    "lipschitz_extremum",
    "brute_force_extrema",
]

BRUTE_FORCE_CAP = 20
LIPSCHITZ_SIZE_CAP = 400


class SizeCapError(Error):
    """Instance too large for the requested (non-production) solver."""


class InternalSolverError(Error):
    """The LP route failed on an instance that is feasible by construction."""


@dataclass(frozen=True)
class FractionalProblem:
    """One fractional objective, rows pre-sorted by outcome descending.

    ``cell_weights`` default to 1; zero weights are rejected (drop such cells
    before construction). ``unit_term`` selects between the ``u = 1`` and
    ``u = 0`` objectives described in the module docstring.
    """

    y: np.ndarray
    w: np.ndarray
    Lambda: float
    cell_weights: np.ndarray | None = None
    unit_term: bool = True

    def __post_init__(self) -> None:
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float))
        w = np.ascontiguousarray(np.asarray(self.w, dtype=float))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        if y.ndim != 1 or y.size < 1:
            raise ValueError("y must be a nonempty 1-d array")
        if w.shape != y.shape:
            raise ValueError("w must match y in shape")
        if np.any(np.diff(y) > 0):
            raise ValueError("y must be sorted in descending order")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        if not (np.all(w > 0) and np.all(np.isfinite(w))):
            raise ValueError("w must be positive and finite")
        if self.cell_weights is not None:
            c = np.ascontiguousarray(np.asarray(self.cell_weights, dtype=float))
            object.__setattr__(self, "cell_weights", c)
            if c.shape != y.shape:
                raise ValueError("cell_weights must match y in shape")
            if not (np.all(c > 0) and np.all(np.isfinite(c))):
                raise ValueError("cell_weights must be positive and finite")
        if not (self.Lambda >= 1.0 and math.isfinite(self.Lambda)):
            raise ValueError("Lambda must be finite and >= 1")
        for arr in (self.y, self.w, self.cell_weights):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.y.shape[0]

    def weights(self) -> np.ndarray:
        if self.cell_weights is None:
            return np.ones_like(self.y)
        return self.cell_weights


@dataclass(frozen=True)
class ExtremumResult:
    """Extremum value with the attaining multiplier pattern.

    ``threshold_a`` counts the rows (in the problem's sorted order) placed at
    the leading bound: for a maximization the first ``threshold_a`` rows sit
    at ``Lambda`` and the rest at ``1/Lambda``; for a minimization the roles
    of the bounds are swapped. ``z`` is the realized multiplier vector and is
    authoritative.
    """

    value: float
    threshold_a: int
    z: np.ndarray


def evaluate_fractional(problem: FractionalProblem, z) -> float:
    """Evaluate the fractional objective at a feasible multiplier vector."""
    z = np.asarray(z, dtype=float)
    if z.shape != problem.y.shape:
        raise ValueError("z must match the problem size")
    lo, hi = 1.0 / problem.Lambda, problem.Lambda
    if np.any(z < lo * (1 - 1e-9)) or np.any(z > hi * (1 + 1e-9)):
        raise ValueError("z outside [1/Lambda, Lambda]")
    c = problem.weights()
    u = 1.0 if problem.unit_term else 0.0
    mass = c * (u + z * problem.w)
    return float(np.dot(problem.y, mass) / np.sum(mass))


def _scan_values(problem: FractionalProblem, z_head: float, z_tail: float) -> np.ndarray:
    """Objective at every split a = 0..m of the sorted rows into a leading
    block at ``z_head`` and a trailing block at ``z_tail``; O(m) total."""
    c = problem.weights()
    u = 1.0 if problem.unit_term else 0.0
    cw = c * problem.w
    cyw = cw * problem.y
    num_tail = float(np.dot(problem.y, c) * u + z_tail * np.sum(cyw))
    den_tail = float(np.sum(c) * u + z_tail * np.sum(cw))
    shift = z_head - z_tail
    num = num_tail + shift * np.concatenate([[0.0], np.cumsum(cyw)])
    den = den_tail + shift * np.concatenate([[0.0], np.cumsum(cw)])
    return num / den


def threshold_extremum(problem: FractionalProblem, direction: str) -> ExtremumResult:
    """Extremize by enumerating the m+1 outcome-sorted threshold patterns.

    The maximizer places the large multiplier on the largest outcomes, so it
    suffices to scan prefix splits of the sorted order (the all-small pattern
    is included to cover the boundary case); the minimizer is the same scan
    with the bounds swapped. Linear time after the problem's one-time sort.
    """
    hi, lo = problem.Lambda, 1.0 / problem.Lambda
    if direction == "max":
        vals = _scan_values(problem, hi, lo)
        a = int(np.argmax(vals))
        z = np.where(np.arange(problem.m) < a, hi, lo)
    elif direction == "min":
        vals = _scan_values(problem, lo, hi)
        a = int(np.argmin(vals))
        z = np.where(np.arange(problem.m) < a, lo, hi)
    else:
        raise ValueError("direction must be 'min' or 'max'")
    return ExtremumResult(evaluate_fractional(problem, z), a, z)


def _charnes_cooper_arrays(problem: FractionalProblem):
    """Objective/constraint blocks for the transformed LP in (zbar, t)."""
    m = problem.m
    c = problem.weights()
    u = 1.0 if problem.unit_term else 0.0
    hi, lo = problem.Lambda, 1.0 / problem.Lambda

    obj = np.concatenate([c * problem.y * problem.w, [u * float(np.dot(c, problem.y))]])
    # box rows tie each zbar_i to t: lo * t <= zbar_i <= hi * t
    A_ub = np.zeros((2 * m, m + 1))
    A_ub[:m, :m] = np.eye(m)
    A_ub[:m, m] = -hi
    A_ub[m:, :m] = -np.eye(m)
    A_ub[m:, m] = lo
    b_ub = np.zeros(2 * m)
    # normalization: the transformed denominator equals one
    A_eq = np.concatenate([c * problem.w, [u * float(np.sum(c))]])[None, :]
    b_eq = np.ones(1)
    return obj, A_ub, b_ub, A_eq, b_eq


def _lp_result(problem: FractionalProblem, x: np.ndarray, direction: str) -> ExtremumResult:
    m = problem.m
    t = x[m]
    if not (t > 0 and np.isfinite(t)):
        raise InternalSolverError("Charnes-Cooper scale variable is not positive")
    z = np.clip(x[:m] / t, 1.0 / problem.Lambda, problem.Lambda)
    mid = math.sqrt(problem.Lambda * (1.0 / problem.Lambda))  # = 1
    big = z > mid
    a = int(np.sum(big)) if direction == "max" else int(np.sum(~big))
    return ExtremumResult(evaluate_fractional(problem, z), a, z)


def charnes_cooper_lp(problem: FractionalProblem, direction: str) -> ExtremumResult:
    """Extremize through the Charnes-Cooper linear program.

    Exists as an independent cross-check of the threshold scan and as the
    base of the Lipschitz-constrained solver; not the production path.
    """
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    obj, A_ub, b_ub, A_eq, b_eq = _charnes_cooper_arrays(problem)
    try:
        sol = solve_lp(obj, A_ub, b_ub, A_eq, b_eq, maximize=(direction == "max"))
    except SimplexError as exc:
        raise InternalSolverError(f"Charnes-Cooper LP failed: {exc}") from exc
    return _lp_result(problem, sol.x, direction)


def separable_ate_extremum(
    treated: FractionalProblem, control: FractionalProblem, direction: str
) -> tuple[float, ExtremumResult, ExtremumResult]:
    """Extremize a difference of two fractional objectives with disjoint
    variables: the difference splits into one problem per arm, extremized in
    opposite directions."""
    if direction == "max":
        rt = threshold_extremum(treated, "max")
        rc = threshold_extremum(control, "min")
    elif direction == "min":
        rt = threshold_extremum(treated, "min")
        rc = threshold_extremum(control, "max")
    else:
        raise ValueError("direction must be 'min' or 'max'")
    return rt.value - rc.value, rt, rc


def _scaled_distances(rows: np.ndarray) -> np.ndarray:
    s = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.ones(rows.shape[1])
    s = np.where(np.isfinite(s) & (s > 0), s, 1.0)
    r = rows / s
    diff = r[:, None, :] - r[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def lipschitz_extremum(
    problem: FractionalProblem,
    x_rows,
    L: float,
    metric: str = "scaled-euclidean",
    direction: str = "max",
    size_cap: int = LIPSCHITZ_SIZE_CAP,
) -> ExtremumResult:
    """Extremize with the additional pairwise smoothness constraints
    ``z_i <= exp(L * d_ij) * z_j``.

    ``x_rows`` holds the (covariate, outcome) coordinates of each cell,
    aligned to the problem's sorted order; distances are Euclidean after
    dividing each coordinate by its sample standard deviation. The threshold
    structure no longer applies, so the Charnes-Cooper LP is solved with the
    pair constraints added lazily (violated rows are generated until none
    remain, which keeps the working LP far below the full m*(m-1) rows).
    """
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    if metric != "scaled-euclidean":
        raise ValueError(f"unsupported metric {metric!r}")
    if not (L > 0 or L == 0):
        raise ValueError("L must be nonnegative")
    m = problem.m
    if m > size_cap:
        raise SizeCapError(
            f"m={m} exceeds the Lipschitz LP cap ({size_cap}); use threshold_extremum "
            "for the unconstrained model"
        )
    rows = np.asarray(x_rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] != m:
        raise ValueError("x_rows must have one row per problem cell")

    log_ratio_cap = np.minimum(L * _scaled_distances(rows), 2.0 * math.log(problem.Lambda))
    ratio_cap = np.exp(log_ratio_cap)
    # pairs whose cap already exceeds Lambda^2 are implied by the box
    ii, jj = np.nonzero(log_ratio_cap < 2.0 * math.log(problem.Lambda) - 1e-12)
    off = ii != jj
    ii, jj = ii[off], jj[off]

    obj, A_box, b_box, A_eq, b_eq = _charnes_cooper_arrays(problem)
    active: list[int] = []
    viol_tol = 1e-9

    for _ in range(200):
        if active:
            extra = np.zeros((len(active), m + 1))
            for r, k in enumerate(active):
                extra[r, ii[k]] = 1.0
                extra[r, jj[k]] = -ratio_cap[ii[k], jj[k]]
            A_ub = np.vstack([A_box, extra])
            b_ub = np.concatenate([b_box, np.zeros(len(active))])
        else:
            A_ub, b_ub = A_box, b_box
        try:
            sol = solve_lp(obj, A_ub, b_ub, A_eq, b_eq, maximize=(direction == "max"))
        except SimplexError as exc:
            raise InternalSolverError(f"Lipschitz LP failed: {exc}") from exc
        zbar, t = sol.x[:m], sol.x[m]
        if not (t > 0):
            raise InternalSolverError("Charnes-Cooper scale variable is not positive")
        z = zbar / t
        slack = z[ii] - ratio_cap[ii, jj] * z[jj]
        violated = np.nonzero(slack > viol_tol)[0]
        already = set(active)
        new = [k for k in violated if k not in already]
        if not new:
            break
        order = np.argsort(-slack[new], kind="stable")
        active.extend([new[k] for k in order[: max(4 * m, 64)]])
    else:
        raise InternalSolverError("Lipschitz constraint generation did not settle")

    return _lp_result(problem, sol.x, direction)


def brute_force_extrema(
    problem: FractionalProblem, cap: int = BRUTE_FORCE_CAP
) -> tuple[float, float]:
    """Exhaustive enumeration of all 2^m bound patterns; debugging oracle.

    Valid because an extremal vertex exists for these objectives. Refuses
    instances with m above ``cap``.
    """
    m = problem.m
    if m > cap:
        raise SizeCapError(f"m={m} exceeds the brute-force cap ({cap})")
    c = problem.weights()
    u = 1.0 if problem.unit_term else 0.0
    hi, lo = problem.Lambda, 1.0 / problem.Lambda
    best_min, best_max = np.inf, -np.inf
    patterns = np.arange(2**m, dtype=np.uint64)
    chunk = 1 << 14
    bits = (1 << np.arange(m, dtype=np.uint64)).astype(np.uint64)
    for start in range(0, patterns.size, chunk):
        block = patterns[start : start + chunk]
        Z = np.where((block[:, None] & bits) != 0, hi, lo)
        mass = c * (u + Z * problem.w)
        vals = mass @ problem.y / np.sum(mass, axis=1)
        best_min = min(best_min, float(np.min(vals)))
        best_max = max(best_max, float(np.max(vals)))
    return best_min, best_max
