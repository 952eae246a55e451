"""Dense two-phase simplex for the small LPs used throughout the package.

Problems are stated as: maximize c.z subject to A z <= b with z free.
Free variables are split internally; Bland's rule avoids cycling.  Sizes
here are desk-scale (tens of rows), so a dense tableau is the right tool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-9
_MAX_ITER = 20000


@dataclass(frozen=True)
class LPResult:
    status: str
    z: np.ndarray | None
    value: float | None


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    # keep the pivot column numerically exact
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def _run_phase(T, basis, ncols, allowed):
    """Minimize the objective in the last tableau row over allowed columns."""
    for _ in range(_MAX_ITER):
        improving = np.flatnonzero(allowed & (T[-1, :ncols] < -_PIVOT_TOL))
        if improving.size == 0:
            return True
        entering = improving[0]  # Bland: smallest index
        col = T[:-1, entering]
        positive = col > _PIVOT_TOL
        if not positive.any():
            return False  # unbounded in this direction
        ratios = np.full(col.shape[0], np.inf)
        ratios[positive] = T[:-1, -1][positive] / col[positive]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + _PIVOT_TOL)
        row = ties[np.argmin(basis[ties])]  # Bland: smallest basic index
        _pivot(T, basis, row, entering)
    raise RuntimeError("simplex iteration limit exceeded")


def solve_lp(c, A, b):
    """Maximize c.z s.t. A z <= b, z free.  Returns an LPResult.

    The returned z is a vertex solution; value is c.z at the optimum.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape != (b.shape[0], c.shape[0]):
        raise ValueError("inconsistent LP shapes")
    m, n = A.shape

    # scale rows to unit max-norm for stable pivot tolerances
    row_scale = np.maximum(np.max(np.abs(A), axis=1), np.abs(b))
    row_scale[row_scale == 0.0] = 1.0
    A = A / row_scale[:, None]
    b = b / row_scale

    # split free variables: z = u - v, add slacks
    A2 = np.hstack([A, -A, np.eye(m)])
    cost = np.concatenate([-c, c, np.zeros(m)])  # minimize -c.z
    nvar = 2 * n + m

    neg = b < 0
    A2[neg] *= -1.0
    b = np.where(neg, -b, b)
    # rows that were negated lost their identity slack; give them artificials
    art_rows = np.where(neg)[0]
    nart = art_rows.shape[0]
    ncols = nvar + nart
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :nvar] = A2
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = 2 * n + i  # slack
    for k, i in enumerate(art_rows):
        T[i, nvar + k] = 1.0
        basis[i] = nvar + k

    allowed = np.ones(ncols, dtype=bool)
    if nart:
        # phase 1: minimize sum of artificials
        T[-1, :] = 0.0
        for i in art_rows:
            T[-1, :] -= T[i, :]
        for i in art_rows:
            T[-1, basis[i]] = 0.0
        if not _run_phase(T, basis, ncols, allowed):
            raise RuntimeError("phase-1 objective unbounded")  # cannot happen
        if T[-1, -1] < -1e-7:
            return LPResult(INFEASIBLE, None, None)
        # drive leftover artificials out of the basis
        for i in range(m):
            if basis[i] >= nvar:
                piv = np.where(np.abs(T[i, :nvar]) > _PIVOT_TOL)[0]
                if piv.size:
                    _pivot(T, basis, i, piv[0])
        allowed[nvar:] = False

    # phase 2
    T[-1, :] = 0.0
    T[-1, :nvar] = cost
    for i in range(m):
        if basis[i] < nvar and abs(cost[basis[i]]) > 0.0:
            T[-1, :] -= cost[basis[i]] * T[i, :]
    if not _run_phase(T, basis, ncols, allowed):
        return LPResult(UNBOUNDED, None, None)

    full = np.zeros(ncols)
    for i in range(m):
        if basis[i] < ncols:
            full[basis[i]] = T[i, -1]
    z = full[:n] - full[n:2 * n]
    return LPResult(OPTIMAL, z, float(c @ z))
