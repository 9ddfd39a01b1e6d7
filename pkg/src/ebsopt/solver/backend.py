"""External MIP backend: hand the LP-text problem to a configured executable.

The executable named by the EBSOPT_MIP_BACKEND environment variable is
invoked as ``<exe> <problem.lp> <solution.out>`` and must write a solution
file of ``name value`` lines. Reserved names: ``_status`` (optimal |
infeasible | feasible | time_limit) and optionally ``_objective``. The
objective reported back to callers is always recomputed from the returned
variable values, never trusted from the file.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import time

import numpy as np

from .branch_bound import Solution, SolverError, SolverOptions, _materialize_fragments

ENV_VAR = "EBSOPT_MIP_BACKEND"


class BackendError(SolverError):
    pass


def backend_available() -> bool:
    exe = os.environ.get(ENV_VAR)
    return bool(exe) and os.path.exists(exe)


def solve_external(problem, options: SolverOptions | None = None,
                   objective_index: int = 0) -> Solution:
    options = options or SolverOptions()
    exe = os.environ.get(ENV_VAR)
    if not exe:
        raise BackendError(f"{ENV_VAR} is not set")
    t0 = time.perf_counter()

    objectives = sorted(problem.objectives, key=lambda o: o.priority)
    objective = objectives[objective_index]
    if objective.fragments:
        problem, objective = _materialize_fragments(problem, objective)

    with tempfile.TemporaryDirectory(prefix="ebsopt-backend-") as tmp:
        lp_path = os.path.join(tmp, "problem.lp")
        out_path = os.path.join(tmp, "solution.out")
        marked = problem.copy()
        marked.objectives = [objective]
        with open(lp_path, "w", encoding="utf-8") as fh:
            fh.write(marked.to_lp_text())
        try:
            proc = subprocess.run(
                [exe, lp_path, out_path],
                capture_output=True, text=True, timeout=options.time_limit,
            )
        except subprocess.TimeoutExpired:
            return Solution("time_limit", None, [], time.perf_counter() - t0,
                            detail="backend wall-clock timeout")
        if proc.returncode != 0:
            raise BackendError(f"backend exited {proc.returncode}: {proc.stderr.strip()}")
        if not os.path.exists(out_path):
            raise BackendError("backend produced no solution file")
        status, values = _parse_solution(out_path, problem)

    if status == "infeasible" or values is None:
        return Solution(status, None, [], time.perf_counter() - t0)
    vec = np.array([values[v.name] for v in problem.variables])
    return Solution(status, values, [objective.evaluate(vec)],
                    time.perf_counter() - t0, gap=0.0 if status == "optimal" else 1.0)


def _parse_solution(path, problem):
    status = None
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise BackendError(f"{path}:{lineno}: expected 'name value', got {line!r}")
            name, raw = parts
            if name == "_status":
                status = raw
                continue
            if name == "_objective":
                continue
            try:
                values[name] = float(raw)
            except ValueError:
                raise BackendError(f"{path}:{lineno}: bad value {raw!r}") from None
    if status is None:
        raise BackendError("solution file lacks a _status line")
    if status not in ("optimal", "feasible", "infeasible", "time_limit"):
        raise BackendError(f"unknown backend status {status!r}")
    if status == "infeasible":
        return status, None
    missing = [v.name for v in problem.variables if v.name not in values]
    if missing:
        raise BackendError(f"backend solution misses variables: {missing[:5]}")
    return status, values
