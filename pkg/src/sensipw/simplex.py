"""Dense two-phase primal simplex with bounded variables and Bland's rule.

This is a small, deliberately simple solver for the modest linear programs
produced by the Charnes-Cooper transformation (a few hundred rows); it keeps
an explicit tableau, uses Bland's anti-cycling rule throughout, and treats
entries below the pivot tolerance as zero. No sparse machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Error

__all__ = ["SimplexError", "LPSolution", "solve_lp"]

PIVOT_TOL = 1e-10
COST_TOL = 1e-9
FEAS_TOL = 1e-8


class SimplexError(Error):
    """Infeasible or unbounded program, or iteration limit exceeded."""


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    iterations: int


class _Tableau:
    """Bounded-variable simplex state.

    ``A`` and ``b`` are kept transformed (left-multiplied by the basis
    inverse); nonbasic variables sit at one of their finite bounds and ``xb``
    holds the current basic values.
    """

    def __init__(self, A, b, lo, up):
        self.A = A
        self.b = b
        self.lo = lo
        self.up = up
        self.m, self.n = A.shape
        self.basis = np.full(self.m, -1, dtype=int)
        self.in_basis = np.zeros(self.n, dtype=bool)
        self.at_upper = np.zeros(self.n, dtype=bool)
        self.xb = np.zeros(self.m)
        self.iterations = 0

    def nonbasic_value(self, j: int) -> float:
        return self.up[j] if self.at_upper[j] else self.lo[j]

    def solution(self) -> np.ndarray:
        x = np.where(self.at_upper, self.up, self.lo).astype(float)
        x[self.basis] = self.xb
        return x

    def set_basis(self, basis: np.ndarray) -> None:
        self.basis = basis.copy()
        self.in_basis[:] = False
        self.in_basis[basis] = True

    def normalize_basis_rows(self) -> None:
        for i in range(self.m):
            piv = self.A[i, self.basis[i]]
            if piv != 1.0:
                self.A[i] /= piv
                self.b[i] /= piv

    def refresh_xb(self) -> None:
        x = np.where(self.at_upper, self.up, self.lo).astype(float)
        x[self.basis] = 0.0
        self.xb = self.b - self.A @ x

    def price(self, c: np.ndarray) -> np.ndarray:
        return c - c[self.basis] @ self.A

    def pivot(self, row: int, col: int) -> None:
        """Row-reduce so ``col`` becomes the basic column of ``row``.

        Leaves ``xb`` untouched; callers update it (or call refresh_xb).
        """
        piv = self.A[row, col]
        self.A[row] /= piv
        self.b[row] /= piv
        factors = self.A[:, col].copy()
        factors[row] = 0.0
        self.A -= np.outer(factors, self.A[row])
        self.b -= factors * self.b[row]
        leave = self.basis[row]
        self.in_basis[leave] = False
        self.basis[row] = col
        self.in_basis[col] = True

    def minimize(self, c: np.ndarray, max_iter: int) -> None:
        """Bland-rule bounded-variable simplex until optimal for cost c."""
        cost_tol = COST_TOL * max(1.0, float(np.max(np.abs(c))))
        while True:
            self.iterations += 1
            if self.iterations > max_iter:
                raise SimplexError("simplex iteration limit exceeded")
            d = self.price(c)

            enter = -1
            direction = 0.0
            for j in range(self.n):
                if self.in_basis[j] or self.lo[j] == self.up[j]:
                    continue
                if not self.at_upper[j] and d[j] < -cost_tol:
                    enter, direction = j, 1.0
                    break
                if self.at_upper[j] and d[j] > cost_tol:
                    enter, direction = j, -1.0
                    break
            if enter < 0:
                return

            col = self.A[:, enter]
            t_best = self.up[enter] - self.lo[enter]  # bound-flip distance
            leave_row = -1
            leave_to_upper = False
            for i in range(self.m):
                coef = direction * col[i]
                if coef > PIVOT_TOL:
                    t = max(self.xb[i] - self.lo[self.basis[i]], 0.0) / coef
                    hits_upper = False
                elif coef < -PIVOT_TOL:
                    ub = self.up[self.basis[i]]
                    if np.isinf(ub):
                        continue
                    t = max(ub - self.xb[i], 0.0) / (-coef)
                    hits_upper = True
                else:
                    continue
                better = t < t_best - PIVOT_TOL
                tie = (
                    t < t_best + PIVOT_TOL
                    and leave_row >= 0
                    and self.basis[i] < self.basis[leave_row]
                )
                if better or tie:
                    t_best, leave_row, leave_to_upper = t, i, hits_upper

            if np.isinf(t_best):
                raise SimplexError("problem is unbounded")

            if leave_row < 0:
                # entering variable runs to its opposite bound; basis unchanged
                self.xb -= direction * t_best * col
                self.at_upper[enter] = not self.at_upper[enter]
                continue

            enter_value = self.nonbasic_value(enter) + direction * t_best
            new_xb = self.xb - direction * t_best * col
            leave_var = self.basis[leave_row]
            self.at_upper[leave_var] = leave_to_upper
            self.pivot(leave_row, enter)
            new_xb[leave_row] = enter_value
            self.xb = new_xb


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    bounds=None,
    maximize: bool = False,
    max_iter: int | None = None,
) -> LPSolution:
    """Solve min (or max) c'x subject to A_ub x <= b_ub, A_eq x = b_eq and
    per-variable bounds (default [0, inf); upper bounds may be infinite).

    Raises :class:`SimplexError` for infeasible or unbounded programs.
    """
    c = np.asarray(c, dtype=float)
    nvar = c.shape[0]
    A_ub = np.zeros((0, nvar)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, nvar)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    lo = np.zeros(nvar)
    up = np.full(nvar, np.inf)
    if bounds is not None:
        for j, (l, u) in enumerate(bounds):
            lo[j] = -np.inf if l is None else l
            up[j] = np.inf if u is None else u
    if np.any(np.isinf(lo)):
        raise ValueError("free variables are not supported; give finite lower bounds")
    if np.any(lo > up):
        raise SimplexError("infeasible: a lower bound exceeds its upper bound")

    obj_struct = -c if maximize else c

    # columns: structural | slacks (one per <= row) | artificials (one per row)
    ncols = nvar + m_ub + m
    A = np.zeros((m, ncols))
    A[:m_ub, :nvar] = A_ub
    A[m_ub:, :nvar] = A_eq
    for i in range(m_ub):
        A[i, nvar + i] = 1.0
    b = np.concatenate([b_ub, b_eq]).astype(float)

    lo_full = np.concatenate([lo, np.zeros(ncols - nvar)])
    up_full = np.concatenate([up, np.full(ncols - nvar, np.inf)])
    # artificial columns start pinned open only where used; the rest stay fixed
    up_full[nvar + m_ub:] = 0.0

    resid = b - A[:, :nvar] @ lo   # row residuals at the all-at-lower start
    basis = np.zeros(m, dtype=int)
    art_cols: list[int] = []
    for i in range(m):
        if i < m_ub and resid[i] >= 0.0:
            basis[i] = nvar + i
        else:
            j = nvar + m_ub + i
            A[i, j] = 1.0 if resid[i] >= 0 else -1.0
            up_full[j] = np.inf
            basis[i] = j
            art_cols.append(j)

    if max_iter is None:
        max_iter = 200 * (m + ncols + 10)

    tab = _Tableau(A, b, lo_full, up_full)
    tab.set_basis(basis)
    tab.normalize_basis_rows()
    tab.refresh_xb()

    obj = np.zeros(ncols)
    obj[:nvar] = obj_struct

    if art_cols:
        c1 = np.zeros(ncols)
        c1[art_cols] = 1.0
        tab.minimize(c1, max_iter)
        infeas = float(c1 @ tab.solution())
        scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
        if infeas > FEAS_TOL * scale:
            raise SimplexError("problem is infeasible")
        # pin artificials at zero and drive basic ones out where possible
        for j in art_cols:
            tab.up[j] = 0.0
            tab.at_upper[j] = False
        art_set = set(art_cols)
        for i in range(m):
            jb = tab.basis[i]
            if jb in art_set:
                for j2 in range(nvar + m_ub):
                    if not tab.in_basis[j2] and abs(tab.A[i, j2]) > PIVOT_TOL:
                        tab.at_upper[jb] = False
                        tab.pivot(i, j2)
                        break
        tab.refresh_xb()

    tab.minimize(obj, max_iter)

    x = tab.solution()[:nvar]
    value = float(c @ x)
    x.setflags(write=False)
    return LPSolution(x, value, tab.iterations)
