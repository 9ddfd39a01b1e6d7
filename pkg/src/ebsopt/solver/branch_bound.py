"""Best-first branch-and-bound over the dense dual-simplex relaxation.

Branching is most-fractional (ties to the lowest column index) among the
objective-carrying integer columns first, falling back to the rest; after
branching, the child nearer the relaxation value is processed immediately
(a plunge) while its sibling joins the best-bound heap. The simplex tableau
is resident: moving between tree nodes only swaps variable bounds, which
keeps the basis dual feasible, so every node is a warm-started
re-optimization.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..mip import MipProblem, Objective
from .presolve import presolve
from .simplex import DenseSimplex, LpStatus, NumericalError

INT_TOL = 1e-6


class SolverError(RuntimeError):
    pass


class _TimeUp(Exception):
    pass


@dataclass(frozen=True)
class SolverOptions:
    time_limit: float | None = None
    abs_gap: float = 0.0
    rel_gap: float = 0.0
    node_limit: int | None = None
    lexicographic_slack: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.abs_gap < 0 or self.rel_gap < 0 or self.lexicographic_slack < 0:
            raise ValueError("gaps and lexicographic slack must be nonnegative")


@dataclass
class Solution:
    status: str                 # optimal | feasible | infeasible | time_limit
    values: dict | None
    objective_values: list = field(default_factory=list)
    wall_time: float = 0.0
    node_count: int = 0
    gap: float = math.inf
    pivots: int = 0
    stage1_optimum: float | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible") and self.values is not None


def _materialize_fragments(problem: MipProblem, objective: Objective):
    """Copy the problem, append the objective's PWL fragment variables and
    rows, and return (extended problem, flat objective over it)."""
    ext = problem.copy()
    coeffs = dict(objective.coeffs)
    constant = objective.constant
    for fi, frag in enumerate(objective.fragments):
        aux_idx = []
        for name, lb, ub, is_int in frag.variables:
            aux_idx.append(ext.add_variable(f"{name}#{fi}", lb, ub, is_int))
        for name, terms, sense, rhs in frag.rows:
            row = {}
            for ref, c in terms:
                j = aux_idx[ref[1]] if isinstance(ref, tuple) else ref
                row[j] = row.get(j, 0.0) + c
            ext.add_row(f"{name}#{fi}", row, sense, rhs)
        for ref, c in frag.value_terms:
            j = aux_idx[ref[1]] if isinstance(ref, tuple) else ref
            coeffs[j] = coeffs.get(j, 0.0) + c
        constant += frag.value_constant
    flat = Objective(coeffs, objective.sense, objective.priority, constant)
    return ext, flat


def _rows_satisfied(rows, x, tol=1e-6):
    # absolute tolerance: big-M rows have huge |rhs|, and scaling by it
    # would wave through candidates that are genuinely off by whole units
    for _, coeffs, sense, rhs in rows:
        lhs = 0.0
        for j, c in coeffs.items():
            lhs += c * x[j]
        if sense == "<=" and lhs > rhs + tol:
            return False
        if sense == ">=" and lhs < rhs - tol:
            return False
        if sense == "==" and abs(lhs - rhs) > tol:
            return False
    return True


def solve(problem: MipProblem, options: SolverOptions | None = None,
          objective_index: int = 0, warm_start: dict | None = None) -> Solution:
    """Solve one objective of the problem to proven optimality (within the
    configured gaps). Deterministic: rules depend only on indices.

    ``warm_start`` may carry variable values (by name); if they check out
    feasible they seed the incumbent, which only tightens pruning."""
    options = options or SolverOptions()
    t0 = time.perf_counter()
    if problem.n_variables == 0:
        raise SolverError("empty problem: no variables")
    objectives = sorted(problem.objectives, key=lambda o: o.priority)
    if not objectives:
        raise SolverError("problem has no objective")
    objective = objectives[objective_index]
    if objective.fragments:
        problem, objective = _materialize_fragments(problem, objective)

    sign = 1.0 if objective.sense == "min" else -1.0
    n_orig = problem.n_variables

    pres = presolve(problem.variables, problem.rows)
    if pres.status == "infeasible":
        return Solution("infeasible", None, wall_time=time.perf_counter() - t0,
                        detail=f"presolve: {pres.cause}")

    def finish(status, reduced_x, node_count, pivots, gap, detail=""):
        if reduced_x is None:
            return Solution(status, None, [], time.perf_counter() - t0,
                            node_count, gap, pivots, detail=detail)
        full = np.zeros(n_orig)
        for j, v in pres.fixed.items():
            full[j] = v
        for k, j in enumerate(pres.keep):
            full[j] = reduced_x[k]
        for j, var in enumerate(problem.variables):
            if var.is_integer:
                full[j] = float(round(full[j]))
        value = objective.evaluate(full)
        values = problem.values_by_name(full)
        return Solution(status, values, [value], time.perf_counter() - t0,
                        node_count, gap, pivots, detail=detail)

    if pres.status == "solved":
        return finish("optimal", np.zeros(0), 0, 0, 0.0, detail="presolved")

    keep = pres.keep
    n_red = len(keep)
    lo0 = np.array(pres.lo, dtype=float)
    hi0 = np.array(pres.hi, dtype=float)
    int_cols = np.array([k for k in range(n_red) if pres.is_int[k]], dtype=np.int64)
    c_red = np.zeros(n_red)
    for k, j in enumerate(keep):
        c_red[k] = sign * objective.coeffs.get(j, 0.0)
    # objective value carried by presolve-fixed columns; all internal
    # objective arithmetic is offset-free, so gap ratios must add it back
    fixed_shift = sign * objective.constant + sum(
        sign * c * pres.fixed[j] for j, c in objective.coeffs.items() if j in pres.fixed)

    def true_scale(value):
        return max(1e-10, abs(value + fixed_shift))

    m = len(pres.rows)
    A = np.zeros((m, n_red))
    senses, b = [], np.zeros(m)
    for r, (_, coeffs, sense, rhs) in enumerate(pres.rows):
        for k, c in coeffs.items():
            A[r, k] = c
        senses.append(sense)
        b[r] = rhs

    sx = DenseSimplex(A, senses, b, c_red, lo0, hi0)

    deadline = None if options.time_limit is None else t0 + options.time_limit

    incumbent = None
    inc_obj = math.inf

    def try_candidate(x_red):
        """Accept an integral point as incumbent when it passes the exact
        row check and improves; returns accepted | worse | infeasible."""
        nonlocal incumbent, inc_obj
        cand = np.asarray(x_red, dtype=float).copy()
        cand[int_cols] = np.round(cand[int_cols])
        cand_obj = float(c_red @ cand)
        if cand_obj >= inc_obj - 1e-12:
            return "worse"
        if np.any(cand < lo0 - 1e-9) or np.any(cand > hi0 + 1e-9):
            return "infeasible"
        if not _rows_satisfied(pres.rows, cand):
            return "infeasible"
        incumbent, inc_obj = cand, cand_obj
        return "accepted"

    if warm_start:
        hint = np.zeros(n_red)
        complete = True
        for k, j in enumerate(keep):
            name = problem.variables[j].name
            if name in warm_start:
                hint[k] = float(warm_start[name])
            else:
                complete = False
                break
        if complete:
            try_candidate(hint)

    def on_pivot(_):
        if deadline is not None and time.perf_counter() > deadline:
            raise _TimeUp

    # objective integrality: when every term is integer-valued, any strict
    # improvement is at least one unit, which sharpens pruning
    int_set = set(int_cols.tolist())
    integral_objective = all(
        k in int_set and float(c).is_integer()
        for k, c in enumerate(c_red) if c != 0.0
    )
    obj_step = 1.0 - 1e-6 if integral_objective else 0.0

    counter = 0
    node_count = 0
    # best-bound node order, with one refinement: after branching, the
    # child nearest the relaxation value is processed immediately (a
    # plunge), its sibling parked on the heap. Without completed dives the
    # incumbent side starves on alternative-optima plateaus.
    heap = [(-math.inf, 0, -math.inf, {})]
    exit_status, exit_detail = None, ""
    current_bound = -math.inf
    dive = None

    while heap or dive is not None:
        if dive is not None:
            bound, overrides = dive
            dive = None
        elif heap:
            _key, _tie, bound, overrides = heapq.heappop(heap)
        else:
            break
        current_bound = bound
        if math.isfinite(inc_obj):
            eps = max(options.abs_gap, options.rel_gap * true_scale(inc_obj),
                      obj_step, 1e-9)
            if bound >= inc_obj - eps:
                if dive is None and not heap:
                    current_bound = inc_obj
                    break
                # a parked sibling may still hold a better bound
                continue
        else:
            eps = 1e-9
        if options.node_limit is not None and node_count >= options.node_limit:
            exit_status, exit_detail = "node_limit", "node limit reached"
            break
        if deadline is not None and time.perf_counter() > deadline:
            exit_status = "time_limit"
            break

        lo = lo0.copy()
        hi = hi0.copy()
        for k, (l, h) in overrides.items():
            lo[k], hi[k] = l, h
        sx.apply_bounds(lo, hi)
        node_count += 1
        try:
            lp_status = sx.optimize(on_pivot=on_pivot)
        except _TimeUp:
            exit_status = "time_limit"
            break
        if lp_status == LpStatus.INFEASIBLE:
            continue
        if lp_status == LpStatus.ITERATION_LIMIT:
            raise NumericalError("simplex iteration limit; relaxation stalled")

        lp_obj = sx.objective()
        if math.isfinite(inc_obj) and lp_obj >= inc_obj - eps:
            continue
        x = sx.values()

        def push_split(col, below, above, prefer_down=True):
            """Children with x_col <= below and x_col >= above; the child
            nearer the relaxation value becomes the next dive node, the
            sibling is parked on the heap."""
            nonlocal counter, dive
            key = round(lp_obj, 6)
            children = []
            if below >= lo[col]:
                down = dict(overrides)
                down[col] = (lo[col], float(below))
                children.append(("down", down))
            if above <= hi[col]:
                up = dict(overrides)
                up[col] = (float(above), hi[col])
                children.append(("up", up))
            if not children:
                return
            want = "down" if prefer_down else "up"
            children.sort(key=lambda c: c[0] != want)
            dive = (lp_obj, children[0][1])
            for _, parked in children[1:]:
                counter += 1
                heapq.heappush(heap, (key, -counter, lp_obj, parked))

        def push_children(col, val):
            push_split(col, math.floor(val), math.ceil(val),
                       prefer_down=(val - math.floor(val)) <= 0.5)

        frac = np.abs(x[int_cols] - np.round(x[int_cols]))
        fractional = frac > INT_TOL
        if not fractional.any():
            if try_candidate(x) == "infeasible":
                # integral within tolerance yet infeasible once snapped:
                # rebuild the factorization and re-optimize once, then treat
                # a persistent near-integral column as a branching target
                sx.refresh()
                lp_status = sx.optimize(on_pivot=on_pivot)
                x = sx.values()
                frac = np.abs(x[int_cols] - np.round(x[int_cols]))
                if frac.max(initial=0.0) > INT_TOL:
                    lp_obj = sx.objective()
                    pick = int(np.argmax(np.minimum(frac, 1.0 - frac)))
                    push_children(int(int_cols[pick]), x[int_cols[pick]])
                    continue
                if try_candidate(x) == "infeasible":
                    # snapping broke a row (big-M trickle): split a
                    # near-integral column so each child strictly shrinks
                    # its domain and the exact alternatives get explored
                    split_done = False
                    for pick in np.argsort(-frac):
                        col = int(int_cols[pick])
                        r = round(x[col])
                        if lo[col] < r:
                            push_split(col, r - 1, r)
                            split_done = True
                            break
                        if hi[col] > r:
                            push_split(col, r, r + 1)
                            split_done = True
                            break
                    if not split_done:
                        raise NumericalError("integral relaxation point fails row check")
            continue

        if node_count == 1 or node_count % 64 == 0:
            # rounding heuristic: catches near-integral relaxations and
            # feeds incumbents to the integrality-aware pruning
            try_candidate(x)

        # most-fractional branching, ties to the lowest column index;
        # objective-carrying columns take precedence -- branching columns
        # the objective never sees cannot move the bound (plain
        # most-fractional provably stalls on alternative-optima plateaus
        # at the benchmark scale)
        dist = np.minimum(frac, 1.0 - frac)
        dist[~fractional] = -1.0
        carrying = c_red[int_cols] != 0.0
        if (fractional & carrying).any():
            dist[~carrying] = -1.0
        pick = int(np.argmax(dist))
        push_children(int(int_cols[pick]), x[int_cols[pick]])

    if exit_status is None:
        # search exhausted (or bound caught up with the incumbent)
        best_bound = inc_obj
    else:
        best_bound = min([current_bound] + [entry[2] for entry in heap])

    if incumbent is None:
        if exit_status:
            return Solution(exit_status if exit_status != "node_limit" else "time_limit",
                            None, [], time.perf_counter() - t0, node_count,
                            math.inf, sx.pivots, detail=exit_detail or "no incumbent")
        return Solution("infeasible", None, [], time.perf_counter() - t0,
                        node_count, math.inf, sx.pivots)

    gap_abs = max(0.0, inc_obj - best_bound)
    gap = 0.0 if gap_abs <= 1e-9 else gap_abs / true_scale(inc_obj)
    if exit_status is None and gap_abs <= max(options.abs_gap,
                                              options.rel_gap * true_scale(inc_obj),
                                              1e-9):
        status = "optimal"
        gap = 0.0 if gap_abs <= 1e-9 else gap
    elif exit_status == "time_limit":
        status = "time_limit"
    else:
        status = "feasible"
    return finish(status, incumbent, node_count, sx.pivots, gap, exit_detail)


def solve_lexicographic(problem: MipProblem, options: SolverOptions | None = None,
                        warm_start: dict | None = None) -> Solution:
    """Two-stage lexicographic solve: optimize the first-priority objective
    to value V1, then optimize the second subject to the first staying
    within V1 plus the configured relative slack."""
    options = options or SolverOptions()
    t0 = time.perf_counter()
    objectives = sorted(problem.objectives, key=lambda o: o.priority)
    if len(objectives) != 2:
        raise SolverError(f"lexicographic solve needs exactly 2 priorities, got {len(objectives)}")
    obj1, obj2 = objectives

    if obj1.fragments:
        raise SolverError("first-priority objective must be linear")
    stage1 = solve(problem, options, objective_index=0, warm_start=warm_start)
    if not stage1.ok:
        return stage1
    v1 = stage1.objective_values[0]

    capped = problem.copy()
    slack = options.lexicographic_slack * abs(v1)
    if obj1.sense == "min":
        capped.add_row("stage1_cap", dict(obj1.coeffs), "<=", v1 + slack - obj1.constant)
    else:
        capped.add_row("stage1_cap", dict(obj1.coeffs), ">=", v1 - slack - obj1.constant)

    opts2 = options
    if options.time_limit is not None:
        left = max(1e-3, options.time_limit - (time.perf_counter() - t0))
        opts2 = SolverOptions(left, options.abs_gap, options.rel_gap,
                              options.node_limit, options.lexicographic_slack,
                              options.seed)
    # the stage-1 point extended with consistent fragment values seeds the
    # second stage, so it always starts with a feasible incumbent
    stage2_start = dict(stage1.values)
    vec1 = np.array([stage1.values[v.name] for v in problem.variables])
    for fi, frag in enumerate(obj2.fragments):
        for (name, _lb, _ub, _is_int), value in zip(frag.variables, frag.assign(vec1)):
            stage2_start[f"{name}#{fi}"] = value
    stage2 = solve(capped, opts2, objective_index=1, warm_start=stage2_start)
    if stage2.status == "infeasible":
        raise SolverError(
            "stage-2 infeasible although stage-1 was feasible: " + stage2.detail)

    if stage2.values is None:
        # timed out before any stage-2 incumbent: fall back to the stage-1
        # point, evaluating the secondary objective directly
        final_values = stage1.values
        vec = np.array([final_values[v.name] for v in problem.variables])
        v2 = obj2.evaluate(vec) + sum(f.evaluate(vec) for f in obj2.fragments)
        status = "time_limit"
        gap = stage2.gap
    else:
        final_values = stage2.values
        vec = np.array([final_values[v.name] for v in problem.variables])
        v2 = stage2.objective_values[0]
        gap = stage2.gap
        if stage1.status == "optimal" and stage2.status == "optimal":
            status = "optimal"
        elif "time_limit" in (stage1.status, stage2.status):
            status = "time_limit"
        else:
            status = "feasible"

    v1_final = obj1.evaluate(vec)
    return Solution(status, final_values, [v1_final, v2],
                    time.perf_counter() - t0,
                    stage1.node_count + stage2.node_count, gap,
                    stage1.pivots + stage2.pivots,
                    stage1_optimum=v1, detail=stage2.detail)
