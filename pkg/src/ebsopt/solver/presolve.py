"""Bound-tightening presolve.

Iterates implied-bound propagation over the rows to a fixpoint, rounding
integer bounds, fixing collapsed variables, and dropping redundant rows.
This is what makes scoped problems cheap: equality pins fix their columns,
which resolves dependent balance rows and entire tree-split chains before
the simplex ever sees them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TOL = 1e-9


@dataclass
class PresolveResult:
    status: str                     # "reduced" | "solved" | "infeasible"
    keep: list = None               # original column indices surviving
    lo: list = None
    hi: list = None
    is_int: list = None
    rows: list = None               # (name, {reduced_idx: coef}, sense, rhs)
    fixed: dict = None              # original column index -> value
    cause: str = None               # row/variable that proved infeasibility


def _activity(items, lo, hi):
    """(min_sum, n_min_inf, max_sum, n_max_inf) over a row's terms."""
    mn = mx = 0.0
    n_mn = n_mx = 0
    for j, c in items:
        lo_c = c * lo[j] if c > 0 else c * hi[j]
        hi_c = c * hi[j] if c > 0 else c * lo[j]
        if math.isinf(lo_c):
            n_mn += 1
        else:
            mn += lo_c
        if math.isinf(hi_c):
            n_mx += 1
        else:
            mx += hi_c
    return mn, n_mn, mx, n_mx


def presolve(variables, rows, max_passes=50):
    """Tighten bounds; returns a PresolveResult mapping back to the input."""
    n = len(variables)
    lo = [v.lb for v in variables]
    hi = [v.ub for v in variables]
    is_int = [v.is_integer for v in variables]
    active = [(r.name, sorted(r.coeffs.items()), r.sense, r.rhs) for r in rows]

    def snap(j):
        if is_int[j]:
            lo[j] = math.ceil(lo[j] - TOL)
            hi[j] = math.floor(hi[j] + TOL)
        if lo[j] > hi[j] + TOL:
            return False
        if hi[j] - lo[j] <= TOL:
            value = round(lo[j]) if is_int[j] else 0.5 * (lo[j] + hi[j])
            lo[j] = hi[j] = float(value)
        return True

    for j in range(n):
        if not snap(j):
            return PresolveResult("infeasible", cause=f"bounds of {variables[j].name}")

    for _ in range(max_passes):
        changed = False
        survivors = []
        for name, items, sense, rhs in active:
            mn, n_mn, mx, n_mx = _activity(items, lo, hi)
            min_act = -math.inf if n_mn else mn
            max_act = math.inf if n_mx else mx
            if sense in ("<=", "==") and min_act > rhs + 1e-7:
                return PresolveResult("infeasible", cause=name)
            if sense in (">=", "==") and max_act < rhs - 1e-7:
                return PresolveResult("infeasible", cause=name)
            redundant = (
                (sense == "<=" and max_act <= rhs + TOL)
                or (sense == ">=" and min_act >= rhs - TOL)
                or (sense == "==" and max_act <= rhs + TOL and min_act >= rhs - TOL)
            )
            if redundant:
                changed = True
                continue

            for j, c in items:
                lo_c = c * lo[j] if c > 0 else c * hi[j]
                hi_c = c * hi[j] if c > 0 else c * lo[j]
                if sense in ("<=", "=="):
                    # residual minimum activity of the other terms
                    if n_mn - (1 if math.isinf(lo_c) else 0) == 0:
                        resid = mn - (0.0 if math.isinf(lo_c) else lo_c)
                        limit = (rhs - resid) / c
                        if c > 0 and limit < hi[j] - TOL:
                            hi[j] = limit
                            changed = True
                        elif c < 0 and limit > lo[j] + TOL:
                            lo[j] = limit
                            changed = True
                if sense in (">=", "=="):
                    if n_mx - (1 if math.isinf(hi_c) else 0) == 0:
                        resid = mx - (0.0 if math.isinf(hi_c) else hi_c)
                        limit = (rhs - resid) / c
                        if c > 0 and limit > lo[j] + TOL:
                            lo[j] = limit
                            changed = True
                        elif c < 0 and limit < hi[j] - TOL:
                            hi[j] = limit
                            changed = True
                if not snap(j):
                    return PresolveResult("infeasible", cause=name)
            survivors.append((name, items, sense, rhs))
        active = survivors
        if not changed:
            break

    fixed = {j: lo[j] for j in range(n) if lo[j] == hi[j]}

    # substitute fixed columns; keep only rows that still bind something
    out_rows = []
    remap = {}
    keep = []
    for j in range(n):
        if j not in fixed:
            remap[j] = len(keep)
            keep.append(j)
    for name, items, sense, rhs in active:
        coeffs = {}
        shift = 0.0
        for j, c in items:
            if j in fixed:
                shift += c * fixed[j]
            else:
                coeffs[remap[j]] = c
        new_rhs = rhs - shift
        if not coeffs:
            ok = (
                (sense == "<=" and new_rhs >= -1e-7)
                or (sense == ">=" and new_rhs <= 1e-7)
                or (sense == "==" and abs(new_rhs) <= 1e-7)
            )
            if not ok:
                return PresolveResult("infeasible", cause=name)
            continue
        out_rows.append((name, coeffs, sense, new_rhs))

    if not keep:
        return PresolveResult("solved", keep=[], lo=[], hi=[], is_int=[],
                              rows=[], fixed=fixed)
    return PresolveResult(
        "reduced",
        keep=keep,
        lo=[lo[j] for j in keep],
        hi=[hi[j] for j in keep],
        is_int=[is_int[j] for j in keep],
        rows=out_rows,
        fixed=fixed,
    )
