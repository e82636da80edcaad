"""Nuisance-model fitting: maximum-likelihood logistic regression for the
selection/propensity model and least squares for the outcome model.

Both fitters prepend an intercept column. The logistic fitter is plain
Newton/IRLS with step-halving and no regularization; bootstrap resamples of
small datasets can be separable or rank deficient, so those conditions raise
typed errors that the resampling engine catches and retries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Error

__all__ = [
    "FitError",
    "SeparationError",
    "RankDeficiencyError",
    "DegenerateClassError",
    "LogisticFit",
    "LinearFit",
    "fit_logistic",
    "fit_ols",
]

GRADIENT_TOL = 1e-8
MAX_ITER = 100
SEPARATION_BOUND = 1e4


class FitError(Error):
    """Base class for nuisance-fit failures (all retryable in the bootstrap)."""


class SeparationError(FitError):
    """Coefficients diverged: the classes are (quasi-)separable."""


class RankDeficiencyError(FitError):
    """The design matrix does not have full column rank."""


class DegenerateClassError(FitError):
    """Only one indicator class present (with positive weight)."""


@dataclass(frozen=True)
class LogisticFit:
    """MLE of a logistic model with intercept.

    ``beta`` has length d+1 (intercept first); ``linear_predictors[i]`` is the
    stored inner product of ``beta`` with the intercept-augmented row i.
    """

    beta: np.ndarray
    linear_predictors: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float


@dataclass(frozen=True)
class LinearFit:
    """Least-squares fit with intercept; ``fitted`` covers every input row."""

    theta: np.ndarray
    fitted: np.ndarray


def _augment(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _log_likelihood(g: np.ndarray, a: np.ndarray, w: np.ndarray) -> float:
    # a*g - log(1 + e^g), evaluated stably for large |g|
    return float(np.sum(w * (a * g - (np.logaddexp(0.0, g)))))


def _expit(g: np.ndarray) -> np.ndarray:
    out = np.empty_like(g)
    pos = g >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-g[pos]))
    eg = np.exp(g[~pos])
    out[~pos] = eg / (1.0 + eg)
    return out


def fit_logistic(
    x,
    a,
    case_weights=None,
    *,
    tol: float = GRADIENT_TOL,
    max_iter: int = MAX_ITER,
    check_rank: bool = True,
    start=None,
) -> LogisticFit:
    """Fit a (weighted) logistic regression by Newton's method.

    ``x`` is n x d (d may be 0 for an intercept-only model), ``a`` the 0/1
    response, ``case_weights`` optional nonnegative reals (a weight of k is
    equivalent to repeating the row k times, which is how bootstrap resamples
    are fitted without materializing them).

    ``start`` optionally seeds Newton with known-good coefficients (the
    bootstrap warm-starts each resample refit at the full-sample fit; the
    converged optimum does not depend on the start).

    The convergence tolerance applies to the gradient normalized by the mean
    case weight, so rescaling all weights by a constant stops at the same
    iterate (the likelihood argmax is scale-free and the fitted coefficients
    must not depend on such scaling).

    Raises ``DegenerateClassError`` if either class has no weight,
    ``RankDeficiencyError`` if the weighted design is column-rank deficient,
    and ``SeparationError`` if the coefficients run away (max-norm above
    ``1e4``) before the gradient converges.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if x.size == 0:
        x = x.reshape(n, 0)
    X = np.hstack([np.ones((n, 1)), x])
    p_cols = X.shape[1]

    if case_weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(case_weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("case_weights must be nonnegative finite, one per row")

    if np.sum(w[a == 1]) <= 0 or np.sum(w[a == 0]) <= 0:
        raise DegenerateClassError("both indicator classes need positive total weight")
    if int(np.sum(w > 0)) < p_cols:
        raise RankDeficiencyError(
            f"need at least {p_cols} positively weighted rows, got {int(np.sum(w > 0))}"
        )
    if check_rank:
        scaled = X * np.sqrt(w)[:, None]
        if np.linalg.matrix_rank(scaled) < p_cols:
            raise RankDeficiencyError("design matrix is column-rank deficient")

    if start is None:
        beta = np.zeros(p_cols)
    else:
        beta = np.asarray(start, dtype=float).copy()
        if beta.shape != (p_cols,):
            raise ValueError(f"start must have shape ({p_cols},)")
    grad_tol = tol * float(np.mean(w))
    g = X @ beta
    ll = _log_likelihood(g, a, w)
    grad_norm = np.inf
    iterations = 0
    converged = False

    for iterations in range(1, max_iter + 1):
        p = _expit(g)
        grad = X.T @ (w * (a - p))
        grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if grad_norm <= grad_tol:
            converged = True
            iterations -= 1
            break
        wdiag = w * p * (1.0 - p)
        H = (X * wdiag[:, None]).T @ X
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError("singular weighted normal equations") from exc
        if not np.all(np.isfinite(step)):
            raise RankDeficiencyError("non-finite Newton step")

        scale = 1.0
        for _ in range(40):
            cand = beta + scale * step
            g_cand = X @ cand
            ll_cand = _log_likelihood(g_cand, a, w)
            if ll_cand >= ll - 1e-12 * (1.0 + abs(ll)):
                break
            scale *= 0.5
        beta, g, ll = cand, g_cand, ll_cand

        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError(
                "coefficients exceeded the separation bound; classes look separable"
            )
    else:
        p = _expit(g)
        grad = X.T @ (w * (a - p))
        grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
        converged = grad_norm <= grad_tol

    lp = X @ beta
    lp.setflags(write=False)
    beta = beta.copy()
    beta.setflags(write=False)
    return LogisticFit(beta, lp, converged, iterations, grad_norm)


def _first_dependent_column(X: np.ndarray, tol: float = 1e-10) -> int | None:
    """Modified Gram-Schmidt scan; returns the first column that is (near-)
    linearly dependent on its predecessors, or None if X has full rank."""
    basis: list[np.ndarray] = []
    for j in range(X.shape[1]):
        v = X[:, j].astype(float)
        norm0 = np.linalg.norm(v)
        for q in basis:
            v = v - (q @ v) * q
        # re-orthogonalize once for numerical safety
        for q in basis:
            v = v - (q @ v) * q
        norm = np.linalg.norm(v)
        if norm <= tol * max(1.0, norm0):
            return j
        basis.append(v / norm)
    return None


def _column_name(j: int) -> str:
    return "intercept" if j == 0 else f"covariate {j - 1}"


def fit_ols(x, y, subset_mask=None, case_weights=None) -> LinearFit:
    """Least squares with intercept, fit on ``subset_mask`` rows (default all)
    and predicted on every row.

    Optional ``case_weights`` turn the fit into weighted least squares, which
    is how bootstrap resamples are refit. Rank deficiency raises
    ``RankDeficiencyError`` naming the offending column.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float)
    X = _augment(x)

    if subset_mask is None:
        mask = np.ones(X.shape[0], dtype=bool)
    else:
        mask = np.asarray(subset_mask, dtype=bool)
    Xs, ys = X[mask], y[mask]
    if case_weights is not None:
        w = np.asarray(case_weights, dtype=float)[mask]
        if np.any(w < 0):
            raise ValueError("case_weights must be nonnegative")
        keep = w > 0
        Xs, ys, w = Xs[keep], ys[keep], w[keep]
        root = np.sqrt(w)
        Xs = Xs * root[:, None]
        ys = ys * root

    if Xs.shape[0] < Xs.shape[1]:
        raise FitError(
            f"need at least {Xs.shape[1]} rows in the fitting subset, got {Xs.shape[0]}"
        )
    bad = _first_dependent_column(Xs)
    if bad is not None:
        raise RankDeficiencyError(f"design is rank deficient at {_column_name(bad)}")

    theta, *_ = np.linalg.lstsq(Xs, ys, rcond=None)
    fitted = X @ theta
    theta.setflags(write=False)
    fitted.setflags(write=False)
    return LinearFit(theta, fitted)
