"""Exact piecewise-linearization of separable convex quadratics.

Each term ``coef * (L(x) + c0)^2`` with an integer-valued aggregate ``L``
gets an integer auxiliary ``t = L(x) + c0`` and an incremental (delta)
expansion of ``t^2`` over its range: unit-interval fill variables whose
filling order is enforced by binaries, so the fragment value equals the
square at every feasible integer point, not only at optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class LinearizationError(ValueError):
    pass


@dataclass
class PwlFragment:
    """Extra variables/rows plus the value expression they contribute.

    ``variables``: (name, lb, ub, is_integer); rows reference problem
    columns by plain index and fragment variables as ("aux", k).
    ``terms`` keeps the original quadratic description so the fragment can
    be evaluated directly at any point.
    """

    variables: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    value_terms: list = field(default_factory=list)
    value_constant: float = 0.0
    terms: list = field(default_factory=list)   # (coef, {col: c}, const)
    breakpoints: list = field(default_factory=list)  # (lo, hi) per term

    def evaluate(self, vec) -> float:
        total = 0.0
        for coef, form, const in self.terms:
            agg = const + sum(c * vec[j] for j, c in form.items())
            total += coef * agg * agg
        return total

    def assign(self, vec):
        """Feasible values for every fragment variable at the given point
        (aggregates assumed integral): t, left-packed unit fills, and the
        ordering binaries that witness the packing."""
        out = []
        for (coef, form, const), (lo, hi) in zip(self.terms, self.breakpoints):
            t = round(const + sum(c * vec[j] for j, c in form.items()))
            out.append(float(t))
            width = hi - lo
            if width == 0:
                continue
            fill = t - lo
            deltas = [1.0 if s < fill else 0.0 for s in range(width)]
            out.extend(deltas)
            out.extend(deltas[1:])  # w_s = delta_{s+1} satisfies both orderings
        return out


def _integer_range(form, const, lo, hi):
    lo_sum = const
    hi_sum = const
    for j, c in form.items():
        if not math.isfinite(lo[j]) or not math.isfinite(hi[j]):
            raise LinearizationError(f"column {j} of a quadratic aggregate is unbounded")
        lo_sum += c * (lo[j] if c > 0 else hi[j])
        hi_sum += c * (hi[j] if c > 0 else lo[j])
    for value, what in ((lo_sum, "lower"), ((hi_sum), "upper")):
        if abs(value - round(value)) > 1e-9:
            raise LinearizationError(
                f"aggregate {what} bound {value} is not integral; "
                "quadratics must range over integers")
    return int(round(lo_sum)), int(round(hi_sum))


def linearize_separable_quadratic(terms, problem, max_range=None) -> PwlFragment:
    """Build one fragment covering ``sum_j coef_j * (L_j)^2``.

    ``terms``: iterable of (coef, {column_index: c}, constant). Every
    coefficient in each aggregate must be integral so the aggregate takes
    integer values. ``max_range`` caps the per-term breakpoint count
    (default: 10 x the largest spot capacity known to the problem).
    """
    if max_range is None:
        max_range = 10 * int(problem.metadata.get("max_capacity", 10))
    lo = [v.lb for v in problem.variables]
    hi = [v.ub for v in problem.variables]

    frag = PwlFragment()
    for idx, (coef, form, const) in enumerate(terms):
        for j, c in form.items():
            if abs(c - round(c)) > 1e-9 or abs(const - round(const)) > 1e-9:
                raise LinearizationError(
                    f"term {idx}: non-integer coefficient {c} in aggregate; "
                    "integer range not derivable")
        t_lo, t_hi = _integer_range(form, const, lo, hi)
        width = t_hi - t_lo
        if width > max_range:
            raise LinearizationError(
                f"term {idx}: aggregate range {width} exceeds cap {max_range}")
        frag.terms.append((float(coef), dict(form), float(const)))
        frag.breakpoints.append((t_lo, t_hi))

        t_k = len(frag.variables)
        frag.variables.append((f"pwl_t[{idx}]", t_lo, t_hi, True))
        # t equals the aggregate
        row = [(("aux", t_k), 1.0)] + [(j, -c) for j, c in sorted(form.items())]
        frag.rows.append((f"pwl_link[{idx}]", row, "==", float(const)))

        if width == 0:
            frag.value_constant += coef * (t_lo ** 2)
            continue

        delta_ks = []
        for s in range(width):
            delta_ks.append(len(frag.variables))
            # unit fills are forced binary at every integer point by the
            # ordering rows, so declaring them integral costs nothing and
            # keeps reported objective values exact after snapping
            frag.variables.append((f"pwl_d[{idx},{s}]", 0.0, 1.0, True))
        fill_ks = []
        for s in range(width - 1):
            fill_ks.append(len(frag.variables))
            frag.variables.append((f"pwl_w[{idx},{s}]", 0.0, 1.0, True))
        # t = lo + sum of unit fills
        row = [(("aux", t_k), 1.0)] + [(("aux", k), -1.0) for k in delta_ks]
        frag.rows.append((f"pwl_fill[{idx}]", row, "==", float(t_lo)))
        # fill order: delta_{s+1} <= w_s <= delta_s keeps segments left-packed
        for s in range(width - 1):
            frag.rows.append((f"pwl_ord_a[{idx},{s}]",
                              [(("aux", delta_ks[s + 1]), 1.0), (("aux", fill_ks[s]), -1.0)],
                              "<=", 0.0))
            frag.rows.append((f"pwl_ord_b[{idx},{s}]",
                              [(("aux", fill_ks[s]), 1.0), (("aux", delta_ks[s]), -1.0)],
                              "<=", 0.0))
        # value: f(lo) plus marginal slope of each unit segment
        frag.value_constant += coef * (t_lo ** 2)
        for s, k in enumerate(delta_ks):
            slope = 2 * (t_lo + s) + 1
            frag.value_terms.append((("aux", k), coef * slope))
    return frag
