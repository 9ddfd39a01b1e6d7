"""Dense bounded-variable dual simplex over a full tableau.

Every structural variable carries finite bounds (the model layer guarantees
this), so the all-slack basis is dual feasible by construction: each
nonbasic column starts at whichever bound matches the sign of its cost.
Re-optimization after bound changes (branch-and-bound nodes, warm starts)
is a plain dual-simplex run — reduced costs do not depend on bounds, so the
resident basis stays dual feasible across nodes.

Anti-cycling: after ``degeneracy_limit`` consecutive zero-progress pivots
the pivot selection switches to a Bland-style lowest-index rule until
progress resumes.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels

NB_LOWER, NB_UPPER, BASIC, NB_FREE, NB_FIXED = 0, 1, 2, 3, 4

FEAS_TOL = 1e-7
PIV_TOL = 1e-8
DUAL_TOL = 1e-7


class NumericalError(RuntimeError):
    """Relaxation failed for numerical reasons (singular basis, stall)."""


class LpStatus:
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


class DenseSimplex:
    """Owns the tableau for one (re-optimizable) LP in bounded form.

    Rows arrive as ``A x (sense) b``; one slack column per row turns every
    row into an equality. Minimization only: callers negate costs for
    maximization.
    """

    def __init__(self, A, senses, b, cost, lo, hi, refactor_every=1500):
        m, n = A.shape
        self.m, self.n_struct = m, n
        self.N = n + m
        self.refactor_every = refactor_every

        full = np.zeros((m, self.N))
        full[:, :n] = A
        full[np.arange(m), n + np.arange(m)] = 1.0
        self.A_full = full
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.zeros(self.N)
        self.c[:n] = cost

        self.lo = np.empty(self.N)
        self.hi = np.empty(self.N)
        self.lo[:n] = lo
        self.hi[:n] = hi
        for r, s in enumerate(senses):
            if s == "<=":
                self.lo[n + r], self.hi[n + r] = 0.0, math.inf
            elif s == ">=":
                self.lo[n + r], self.hi[n + r] = -math.inf, 0.0
            else:
                self.lo[n + r], self.hi[n + r] = 0.0, 0.0

        self.T = full.copy()
        self.basis = np.array([n + r for r in range(m)], dtype=np.int64)
        self.status = np.empty(self.N, dtype=np.int8)
        self.status[self.basis] = BASIC
        self.nb_val = np.zeros(self.N)
        for j in range(n):
            self._set_nonbasic_start(j)
        self.d = self.c.copy()  # slack basis has zero cost
        self.xB = self.b - self.A_full[:, :n] @ self.nb_val[:n]
        self.pivots = 0
        self._since_refactor = 0

    # -- setup ----------------------------------------------------------

    def _set_nonbasic_start(self, j):
        lo, hi, cj = self.lo[j], self.hi[j], self.c[j]
        if lo == hi:
            self.status[j] = NB_FIXED
            self.nb_val[j] = lo
        elif cj > 0:
            if not math.isfinite(lo):
                raise NumericalError(f"column {j}: positive cost needs a finite lower bound")
            self.status[j] = NB_LOWER
            self.nb_val[j] = lo
        elif cj < 0:
            if not math.isfinite(hi):
                raise NumericalError(f"column {j}: negative cost needs a finite upper bound")
            self.status[j] = NB_UPPER
            self.nb_val[j] = hi
        elif math.isfinite(lo):
            self.status[j] = NB_LOWER
            self.nb_val[j] = lo
        elif math.isfinite(hi):
            self.status[j] = NB_UPPER
            self.nb_val[j] = hi
        else:
            self.status[j] = NB_FREE
            self.nb_val[j] = 0.0

    # -- bound management (branch-and-bound warm starts) -----------------

    def apply_bounds(self, lo_struct, hi_struct):
        """Install new structural bounds, shifting basic values for any
        nonbasic column whose resting value moved."""
        for j in range(self.n_struct):
            nlo, nhi = lo_struct[j], hi_struct[j]
            if nlo == self.lo[j] and nhi == self.hi[j]:
                continue
            self.lo[j], self.hi[j] = nlo, nhi
            st = self.status[j]
            if st == BASIC:
                continue
            if nlo == nhi:
                self.status[j] = NB_FIXED
                new_val = nlo
            elif st == NB_UPPER:
                new_val = nhi
            elif st == NB_FREE:
                new_val = self.nb_val[j]
            elif st == NB_FIXED:
                # reopened column: rest at whichever bound its reduced cost allows
                if self.d[j] >= 0:
                    self.status[j] = NB_LOWER
                    new_val = nlo
                else:
                    self.status[j] = NB_UPPER
                    new_val = nhi
            else:
                new_val = nlo
            delta = new_val - self.nb_val[j]
            if delta != 0.0:
                self.xB -= delta * self.T[:, j]
                self.nb_val[j] = new_val

    # -- main loop --------------------------------------------------------

    def optimize(self, iteration_limit=200_000, degeneracy_limit=60, on_pivot=None):
        basis_lo = self.lo[self.basis]
        basis_hi = self.hi[self.basis]
        stall = 0
        start = self.pivots
        while True:
            r = kernels.most_violated_row(self.xB, basis_lo, basis_hi, FEAS_TOL)
            if r < 0:
                return LpStatus.OPTIMAL
            if self.pivots - start >= iteration_limit:
                return LpStatus.ITERATION_LIMIT

            leave = self.basis[r]
            if self.xB[r] > self.hi[leave]:
                target, sign = self.hi[leave], 1.0
            else:
                target, sign = self.lo[leave], -1.0
            alphas = sign * self.T[r]
            e = kernels.dual_ratio_entering(alphas, self.d, self.status,
                                            PIV_TOL, stall >= degeneracy_limit)
            if e < 0:
                return LpStatus.INFEASIBLE

            alpha = self.T[r, e]
            dual_step = abs(self.d[e])
            step = (self.xB[r] - target) / alpha
            entering_val = self.nb_val[e] + step
            self.xB -= step * self.T[:, e]
            self.xB[r] = entering_val

            kernels.pivot(self.T, self.d, r, e)
            self.status[leave] = NB_UPPER if sign > 0 else NB_LOWER
            if self.lo[leave] == self.hi[leave]:
                self.status[leave] = NB_FIXED
            self.nb_val[leave] = target
            self.status[e] = BASIC
            self.basis[r] = e
            basis_lo[r] = self.lo[e]
            basis_hi[r] = self.hi[e]
            self.pivots += 1
            self._since_refactor += 1
            # dual-degenerate pivots leave the objective flat; a long run of
            # them is the cycling precursor that flips selection to Bland
            stall = stall + 1 if dual_step <= 1e-12 else 0
            if on_pivot is not None and self.pivots % 64 == 0:
                on_pivot(self.pivots)
            if self._since_refactor >= self.refactor_every:
                self.refresh()
                basis_lo = self.lo[self.basis]
                basis_hi = self.hi[self.basis]

    # -- factorization hygiene -------------------------------------------

    def refresh(self):
        """Rebuild tableau, basic values, and reduced costs from the basis."""
        B = self.A_full[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.A_full)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular basis during refactorization: {exc}") from None
        nb_mask = self.status != BASIC
        rhs = self.b - self.A_full[:, nb_mask] @ self.nb_val[nb_mask]
        self.xB = np.linalg.solve(B, rhs)
        y = self.c[self.basis] @ self.T
        self.d = self.c - y
        self.d[self.basis] = 0.0
        self._since_refactor = 0

    # -- solution extraction ----------------------------------------------

    def values(self) -> np.ndarray:
        x = self.nb_val.copy()
        x[self.basis] = self.xB
        return x[: self.n_struct]

    def objective(self) -> float:
        x = self.nb_val.copy()
        x[self.basis] = self.xB
        return float(self.c @ x)
