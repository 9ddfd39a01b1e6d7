"""Mixed-integer problem container and LP-style text export.

A :class:`MipProblem` is a plain polyhedral description: bounded variables,
linear rows, and an ordered list of prioritized objectives. It is built once
by the model/embedding layers and treated as an immutable value afterwards;
solvers never mutate a problem, they copy or index into it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

INT_TOL = 1e-9

SENSE_LE = "<="
SENSE_GE = ">="
SENSE_EQ = "=="


class ModelError(ValueError):
    """Raised when a problem is assembled from inconsistent pieces."""


@dataclass
class Variable:
    name: str
    lb: float
    ub: float
    is_integer: bool = False

    def __post_init__(self):
        if self.lb > self.ub:
            raise ModelError(f"variable {self.name}: lb {self.lb} > ub {self.ub}")
        if self.is_integer and not (math.isfinite(self.lb) and math.isfinite(self.ub)):
            raise ModelError(f"integer variable {self.name} must have finite bounds")


@dataclass
class LinearRow:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float

    def evaluate(self, values) -> float:
        return sum(c * values[j] for j, c in sorted(self.coeffs.items()))

    def slack(self, values) -> float:
        """Signed slack; negative means violated."""
        lhs = self.evaluate(values)
        if self.sense == SENSE_LE:
            return self.rhs - lhs
        if self.sense == SENSE_GE:
            return lhs - self.rhs
        return -abs(lhs - self.rhs)


@dataclass
class Objective:
    coeffs: dict[int, float]
    sense: str  # "min" | "max"
    priority: int = 0
    constant: float = 0.0
    # PWL fragments (see solver.pwl) attached to this objective; their extra
    # variables/rows are materialized only when this objective is optimized.
    fragments: list = field(default_factory=list)

    def evaluate(self, values) -> float:
        total = self.constant
        for j, c in sorted(self.coeffs.items()):
            total += c * values[j]
        return total


@dataclass
class MipProblem:
    variables: list[Variable] = field(default_factory=list)
    rows: list[LinearRow] = field(default_factory=list)
    objectives: list[Objective] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    # -- construction -------------------------------------------------

    def add_variable(self, name, lb, ub, is_integer=False) -> int:
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        self.variables.append(Variable(name, float(lb), float(ub), is_integer))
        self._index[name] = len(self.variables) - 1
        return self._index[name]

    def add_row(self, name, coeffs, sense, rhs) -> int:
        if sense not in (SENSE_LE, SENSE_GE, SENSE_EQ):
            raise ModelError(f"row {name}: bad sense {sense!r}")
        for j in coeffs:
            if not 0 <= j < len(self.variables):
                raise ModelError(f"row {name} references undeclared variable index {j}")
        clean = {j: float(c) for j, c in coeffs.items() if c != 0.0}
        self.rows.append(LinearRow(name, clean, sense, float(rhs)))
        return len(self.rows) - 1

    def add_objective(self, coeffs, sense, priority=0, constant=0.0, fragments=()) -> int:
        if sense not in ("min", "max"):
            raise ModelError(f"objective sense must be min or max, got {sense!r}")
        for j in coeffs:
            if not 0 <= j < len(self.variables):
                raise ModelError(f"objective references undeclared variable index {j}")
        clean = {j: float(c) for j, c in coeffs.items() if c != 0.0}
        self.objectives.append(
            Objective(clean, sense, priority, float(constant), list(fragments))
        )
        return len(self.objectives) - 1

    # -- lookup --------------------------------------------------------

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown variable {name!r}") from None

    def has_variable(self, name: str) -> bool:
        return name in self._index

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def integer_indices(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.is_integer]

    def values_by_name(self, vector) -> dict[str, float]:
        return {v.name: vector[j] for j, v in enumerate(self.variables)}

    def copy(self) -> "MipProblem":
        other = MipProblem(metadata=dict(self.metadata))
        for v in self.variables:
            other.add_variable(v.name, v.lb, v.ub, v.is_integer)
        for r in self.rows:
            other.add_row(r.name, dict(r.coeffs), r.sense, r.rhs)
        for o in self.objectives:
            other.add_objective(dict(o.coeffs), o.sense, o.priority, o.constant, o.fragments)
        return other

    # -- text export ----------------------------------------------------

    def to_lp_text(self) -> str:
        """Plain-text LP rendering: one constraint per line, stable names."""
        out = []
        for o in sorted(self.objectives, key=lambda o: o.priority):
            out.append(f"{o.sense} p{o.priority}: {_render_expr(self, o.coeffs, o.constant)}")
        for r in self.rows:
            out.append(f"{r.name}: {_render_expr(self, r.coeffs, 0.0)} {r.sense} {_fmt(r.rhs)}")
        for v in self.variables:
            out.append(f"bound: {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}")
        ints = " ".join(v.name for v in self.variables if v.is_integer)
        if ints:
            out.append(f"int: {ints}")
        return "\n".join(out) + "\n"


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return repr(round(x, 12))


def _render_expr(problem, coeffs, constant) -> str:
    parts = []
    for j in sorted(coeffs):
        c = coeffs[j]
        sign = "-" if c < 0 else "+"
        if parts or sign == "-":
            parts.append(f"{sign} {_fmt(abs(c))} {problem.variables[j].name}")
        else:
            parts.append(f"{_fmt(abs(c))} {problem.variables[j].name}")
    if constant:
        sign = "-" if constant < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(constant))}")
    return " ".join(parts) if parts else "0"
