"""Pure-numpy fallback for the simplex hot kernels.

Mirrors the signatures of the compiled extension ``_kernels``; the active
implementation is chosen once at import time in :mod:`ebsopt.solver.kernels`.
Status codes: 0 = nonbasic at lower bound, 1 = nonbasic at upper bound,
2 = basic, 3 = nonbasic free (value 0), 4 = nonbasic fixed.
"""

import numpy as np

BACKEND = "numpy"


def pivot(T, d, r, e):
    """Pivot the dense tableau on (row r, column e) and update reduced costs."""
    alpha = T[r, e]
    T[r] /= alpha
    piv_row = T[r]
    col = T[:, e].copy()
    col[r] = 0.0
    # rank-1 elimination of column e from every other row
    T -= np.outer(col, piv_row)
    de = d[e]
    if de != 0.0:
        d -= de * piv_row
    # kill accumulated drift in the pivot column
    T[:, e] = 0.0
    T[r, e] = 1.0
    d[e] = 0.0


def most_violated_row(xB, basis_lo, basis_hi, tol):
    """Index of the basic row with the largest bound violation, or -1."""
    if xB.size == 0:
        return -1
    below = basis_lo - xB
    above = xB - basis_hi
    viol = np.maximum(below, above)
    r = int(np.argmax(viol))
    if viol[r] <= tol:
        return -1
    return r


def dual_ratio_entering(alphas, d, status, piv_tol, bland):
    """Entering column for a dual pivot.

    ``alphas`` is the (sign-adjusted) pivot row; candidates must move the
    leaving basic variable toward its violated bound while keeping reduced
    costs dual-feasible. Returns -1 when the node is primal infeasible.
    """
    cand = ((status == 0) & (alphas > piv_tol)) \
        | ((status == 1) & (alphas < -piv_tol)) \
        | ((status == 3) & (np.abs(alphas) > piv_tol))
    idx = np.nonzero(cand)[0]
    if idx.size == 0:
        return -1
    ratios = np.maximum(d[idx] / alphas[idx], 0.0)
    if bland:
        best = ratios.min()
        return int(idx[ratios <= best + 1e-9][0])
    order = np.lexsort((idx, -np.abs(alphas[idx]), ratios))
    return int(idx[order[0]])
