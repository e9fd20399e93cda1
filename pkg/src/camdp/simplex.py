"""Dense two-phase primal simplex with Bland's rule.

Solves  max c.x  s.t.  A x = b,  x >= 0  for the small, often degenerate
equality systems produced by occupancy-measure programs.  Bland's rule
makes cycling impossible; the problems here are tiny (a few hundred
columns), so robustness is worth far more than speed.  Duals come from
the final basis, y = c_B B^{-1}, which is what the constraint-row
multiplier extraction needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NumericalFailure

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass
class LpResult:
    status: str  # "optimal" or "infeasible"
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None  # one multiplier per input row


def _bland_pivot(tableau, rhs, costs, basis, allowed, max_pivots):
    """Run simplex pivots in place until optimal; Bland's rule throughout."""
    m = tableau.shape[0]
    for _ in range(max_pivots):
        reduced = costs - costs[basis] @ tableau
        reduced[basis] = 0.0
        candidates = np.flatnonzero(allowed & (reduced > PIVOT_TOL))
        if candidates.size == 0:
            return
        j = int(candidates[0])  # smallest index: Bland
        col = tableau[:, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise NumericalFailure("LP unbounded; occupancy programs cannot be")
        ratios = rhs[rows] / col[rows]
        best = ratios.min()
        tied = rows[np.flatnonzero(ratios <= best + 1e-15)]
        r = int(tied[np.argmin(basis[tied])])  # smallest basic index: Bland
        piv = tableau[r, j]
        tableau[r, :] /= piv
        rhs[r] /= piv
        for i in range(m):
            if i != r and abs(tableau[i, j]) > 0.0:
                factor = tableau[i, j]
                tableau[i, :] -= factor * tableau[r, :]
                rhs[i] -= factor * rhs[r]
        np.copyto(rhs, 0.0, where=(rhs < 0) & (rhs > -FEAS_TOL))
        basis[r] = j
    raise NumericalFailure("simplex exceeded the pivot budget")


def solve_lp_max(c, A, b, max_pivots=200_000) -> LpResult:
    """Maximize c.x subject to A x = b, x >= 0.

    Returns the optimal basic solution, the objective, and the row duals
    (in the orientation of the input rows).  status is "infeasible" when
    phase one cannot zero out the artificial variables.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).copy()
    m, n = A.shape

    flips = np.where(b < 0, -1.0, 1.0)
    A = A * flips[:, None]
    b = b * flips

    # Phase one: artificial identity basis, minimize the artificial mass.
    tableau = np.hstack([A, np.eye(m)])
    rhs = b.copy()
    basis = np.arange(n, n + m)
    costs1 = np.concatenate([np.zeros(n), -np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    allowed[n:] = False  # artificials never re-enter
    _bland_pivot(tableau, rhs, costs1, basis, allowed, max_pivots)
    art_mass = rhs[basis >= n].sum() if np.any(basis >= n) else 0.0
    if art_mass > FEAS_TOL:
        return LpResult(status="infeasible")

    # Drive zero-level artificials out of the basis; drop redundant rows.
    keep_rows = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] < n:
            continue
        pivot_cols = np.flatnonzero(np.abs(tableau[r, :n]) > PIVOT_TOL)
        if pivot_cols.size == 0:
            keep_rows[r] = False  # redundant constraint
            continue
        j = int(pivot_cols[0])
        piv = tableau[r, j]
        tableau[r, :] /= piv
        rhs[r] /= piv
        for i in range(m):
            if i != r and abs(tableau[i, j]) > 0.0:
                factor = tableau[i, j]
                tableau[i, :] -= factor * tableau[r, :]
                rhs[i] -= factor * rhs[r]
        basis[r] = j

    row_index = np.flatnonzero(keep_rows)
    tableau2 = tableau[np.ix_(keep_rows, np.arange(n))]
    rhs2 = rhs[keep_rows]
    basis2 = basis[keep_rows]
    allowed2 = np.ones(n, dtype=bool)

    _bland_pivot(tableau2, rhs2, c.copy(), basis2, allowed2, max_pivots)

    x = np.zeros(n)
    x[basis2] = np.clip(rhs2, 0.0, None)
    objective = float(c @ x)

    # Duals from the final basis of the kept rows: solve B^T y = c_B.
    B = A[np.ix_(row_index, basis2)]
    try:
        y_kept = np.linalg.solve(B.T, c[basis2])
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"dual extraction failed: {e}") from e
    duals = np.zeros(m)
    duals[row_index] = y_kept
    duals *= flips  # undo row flips
    return LpResult(status="optimal", x=x, objective=objective, duals=duals)
