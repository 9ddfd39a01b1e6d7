"""Compile a decision-only forest into MIP form and assemble the
prediction-driven problems.

Each tree contributes one binary per node: ``q[h,i]`` is the indicator of
the edge from ``i``'s parent into ``i`` (the root gets a virtual indicator
fixed to 1). Split rows are big-M reformulations sized per split from the
feature's bounds; flow rows force children off when the parent edge is off;
one row per tree activates exactly one leaf. The objective is the mean of
the selected leaf scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forest import Forest
from .mip import SENSE_EQ, SENSE_GE, SENSE_LE, MipProblem
from . import model as core

STRICTNESS_MARGIN = 1e-6


class EncodeError(ValueError):
    pass


class ScopeError(ValueError):
    pass


def split_big_m(threshold: float, lower: float, upper: float, integral: bool = True):
    """Big-M pair for one split: left row needs ``upper - threshold``, right
    row needs ``threshold - lower`` (clamped at zero). Splits on continuous
    features get a strictness margin so the right branch means strictly
    greater."""
    if not (math.isfinite(lower) and math.isfinite(upper)):
        raise EncodeError(f"split on unbounded feature: bounds ({lower}, {upper})")
    m_left = max(0.0, upper - threshold)
    m_right = max(0.0, threshold - lower)
    if not integral:
        m_right += STRICTNESS_MARGIN
    return m_left, m_right


def q_name(h: int, node: int) -> str:
    return f"q[{h},{node}]"


@dataclass
class EncodedForest:
    """Abstract MIP encoding of a decision-only forest.

    Rows reference features by name; :func:`embed_into` resolves them to
    problem columns through a feature map of linear forms.
    """

    forest: Forest
    q_vars: list = field(default_factory=list)       # (h, node_id, fixed_to_one)
    rows: list = field(default_factory=list)         # (name, terms, sense, rhs)
    leaf_terms: list = field(default_factory=list)   # ((h, node), coef)
    big_m: dict = field(default_factory=dict)        # (h, node) -> (m_left, m_right)
    feature_bounds: dict = field(default_factory=dict)


def encode(forest: Forest, feature_bounds: dict) -> EncodedForest:
    """Encode every tree of a decision-only forest.

    ``feature_bounds`` maps decision feature names to (lower, upper); all
    split features must be bounded. Context splits are rejected: run
    partial evaluation first.
    """
    space = forest.feature_space
    enc = EncodedForest(forest, feature_bounds=dict(feature_bounds))
    H = forest.n_trees
    for h, tree in enumerate(forest.trees):
        # q[h,i] is the indicator of the edge into node i; the root's
        # virtual edge is pinned on so the flow rows anchor at depth one
        enc.q_vars.append((h, 0, True))
        for i, node in enumerate(tree.nodes):
            if node.is_leaf:
                continue
            feat = space.features[node.feature]
            if feat.kind != "decision":
                raise EncodeError(
                    f"tree {h} node {i} splits on context feature {feat.name!r}; "
                    "partially evaluate the forest first")
            if feat.name not in feature_bounds:
                raise EncodeError(f"no bounds supplied for split feature {feat.name!r}")
            lo, hi = feature_bounds[feat.name]
            m_left, m_right = split_big_m(node.threshold, lo, hi, feat.integral)
            margin = 0.0 if feat.integral else STRICTNESS_MARGIN
            enc.big_m[(h, i)] = (m_left, m_right)
            enc.q_vars.append((h, node.left, False))
            enc.q_vars.append((h, node.right, False))
            # value <= threshold when the left edge is active
            enc.rows.append((
                f"split_le[{h},{i}]",
                [("feat", feat.name, 1.0), ("q", h, node.left, m_left)],
                SENSE_LE, node.threshold + m_left,
            ))
            # value > threshold when the right edge is active
            enc.rows.append((
                f"split_ge[{h},{i}]",
                [("feat", feat.name, 1.0), ("q", h, node.right, -m_right)],
                SENSE_GE, node.threshold + margin - m_right,
            ))
            # children edges carry exactly the parent edge's activation
            enc.rows.append((
                f"flow[{h},{i}]",
                [("q", h, node.left, 1.0), ("q", h, node.right, 1.0),
                 ("q", h, i, -1.0)],
                SENSE_EQ, 0.0,
            ))
        leaf_row = [("q", h, j, 1.0) for j in tree.leaf_indices()]
        enc.rows.append((f"one_leaf[{h}]", leaf_row, SENSE_EQ, 1.0))
        for j in tree.leaf_indices():
            enc.leaf_terms.append(((h, j), tree.nodes[j].score / H))
    return enc


def embed_into(problem: MipProblem, encoded: EncodedForest, feature_map: dict):
    """Add the encoding's binaries and rows to ``problem``.

    ``feature_map``: feature name -> ({variable name: coef}, constant)
    linear form over existing problem variables. Returns the leaf-score
    objective coefficients (over problem column indices).
    """
    for h, node, fixed in encoded.q_vars:
        lb = 1.0 if fixed else 0.0
        problem.add_variable(q_name(h, node), lb, 1.0, is_integer=True)
    for name, terms, sense, rhs in encoded.rows:
        coeffs = {}
        shift = 0.0
        for term in terms:
            if term[0] == "q":
                _, h, node, coef = term
                j = problem.index_of(q_name(h, node))
                coeffs[j] = coeffs.get(j, 0.0) + coef
            else:
                _, feat_name, coef = term
                if feat_name not in feature_map:
                    raise EncodeError(f"feature {feat_name!r} missing from the feature map")
                form, const = feature_map[feat_name]
                shift += coef * const
                for var_name, c in form.items():
                    j = problem.index_of(var_name)
                    coeffs[j] = coeffs.get(j, 0.0) + coef * c
        problem.add_row(name, coeffs, sense, rhs - shift)
    objective = {}
    for (h, node), coef in encoded.leaf_terms:
        j = problem.index_of(q_name(h, node))
        objective[j] = objective.get(j, 0.0) + coef
    return objective


# ---------------------------------------------------------------------------
# EBS-specific assembly


def ebs_feature_map(n_spots: int) -> dict:
    """Linear forms tying forest decision features to model columns:
    swaps map directly, net moves are the sign-split difference."""
    fmap = {}
    for i in range(n_spots):
        for k in (core.K_LOW, core.K_MID):
            fmap[f"y[{i},{core.SOC_LEVELS[k]}]"] = ({core.var_y(i, k): 1.0}, 0.0)
        for k in range(core.N_LEVELS):
            fmap[f"z[{i},{core.SOC_LEVELS[k]}]"] = (
                {core.var_zp(i, k): 1.0, core.var_zm(i, k): -1.0}, 0.0)
    return fmap


def ebs_feature_bounds(problem: MipProblem, feature_map: dict) -> dict:
    """Interval bounds of each mapped feature, from the problem's columns."""
    bounds = {}
    for name, (form, const) in feature_map.items():
        lo = hi = const
        for var_name, c in form.items():
            var = problem.variables[problem.index_of(var_name)]
            lo += c * (var.lb if c > 0 else var.ub)
            hi += c * (var.ub if c > 0 else var.lb)
        bounds[name] = (lo, hi)
    return bounds


def assemble_e2e(config: core.SystemConfig, spots, fleet: core.FleetState,
                 forest: Forest) -> MipProblem:
    """Forest-objective problem: minimize predicted cost subject to balance
    and resource rows (demand rows are absent; demand lives in the forest's
    training signal)."""
    core.check_spot_roster(spots)
    fleet.check_capacity(spots)
    n = len(spots)
    prob = MipProblem(metadata={
        "kind": "e2e",
        "n_spots": n,
        "max_capacity": max(s.capacity for s in spots),
        "fleet_v": [list(map(int, row)) for row in fleet.v],
    })
    core._add_decision_variables(prob, config, spots, fleet, demand=None)
    core._add_balance_rows(prob, fleet, n)
    core._add_resource_rows(prob, config, spots)

    fmap = ebs_feature_map(n)
    bounds = ebs_feature_bounds(prob, fmap)
    encoded = encode(forest, bounds)
    leaf_obj = embed_into(prob, encoded, fmap)
    prob.add_objective(leaf_obj, "min", priority=0)
    prob.metadata["n_trees"] = forest.n_trees
    return prob


# ---------------------------------------------------------------------------
# scope-down parameterization


@dataclass
class ScopedProblem:
    base: MipProblem
    problem: MipProblem
    free_spots: list
    pinned_values: dict      # coordinate name -> pinned integer value
    pin_rows: list           # row names, one per pinned coordinate


def round_half_toward_zero(value: float) -> int:
    """Nearest integer, ties toward zero (pins are counts)."""
    if value >= 0:
        return math.ceil(value - 0.5)
    return math.floor(value + 0.5)


def scope_down(problem: MipProblem, keep, means: dict) -> ScopedProblem:
    """Pin swap/move coordinates of every spot outside ``keep`` to rounded
    historical means via one equality row per coordinate.

    Stock columns stay free (balance rows determine them); rejected pins
    name the offending coordinate.
    """
    n = problem.metadata.get("n_spots")
    if n is None:
        raise ScopeError("problem lacks n_spots metadata; assemble it first")
    keep = sorted(set(int(i) for i in keep))
    if not keep:
        raise ScopeError("empty free-spot set: nothing left to decide")
    if keep[0] < 0 or keep[-1] >= n:
        raise ScopeError(f"free spots {keep} outside the 0..{n - 1} roster")

    scoped = problem.copy()
    pinned = {}
    pin_rows = []
    outside = [i for i in range(n) if i not in set(keep)]
    for i in outside:
        y_pin = {}
        z_pin = {}
        for k in (core.K_LOW, core.K_MID):
            coord = f"y[{i},{core.SOC_LEVELS[k]}]"
            value = round_half_toward_zero(float(means.get(coord, 0.0)))
            var = scoped.variables[scoped.index_of(core.var_y(i, k))]
            if value < var.lb or value > var.ub:
                raise ScopeError(
                    f"pin {coord}={value} outside bounds [{var.lb:g}, {var.ub:g}]")
            scoped.add_row(f"pin[{coord}]", {scoped.index_of(core.var_y(i, k)): 1.0},
                           SENSE_EQ, float(value))
            pinned[coord] = value
            pin_rows.append(f"pin[{coord}]")
            y_pin[k] = value
        for k in range(core.N_LEVELS):
            coord = f"z[{i},{core.SOC_LEVELS[k]}]"
            value = round_half_toward_zero(float(means.get(coord, 0.0)))
            jp = scoped.index_of(core.var_zp(i, k))
            jm = scoped.index_of(core.var_zm(i, k))
            zmax = scoped.variables[jp].ub
            if abs(value) > zmax:
                raise ScopeError(f"pin {coord}={value} outside bounds [-{zmax:g}, {zmax:g}]")
            scoped.add_row(f"pin[{coord}]", {jp: 1.0, jm: -1.0}, SENSE_EQ, float(value))
            # a pinned net move never pays for simultaneous pickup+drop, so
            # shrinking the split parts to the signed decomposition loses
            # only cost-dominated points
            scoped.variables[jp].ub = float(max(0, value))
            scoped.variables[jm].ub = float(max(0, -value))
            pinned[coord] = value
            pin_rows.append(f"pin[{coord}]")
            z_pin[k] = value
        # the balance rows now determine this spot's stock; collapse its
        # bounds so downstream linearizations see the fixed values
        fleet_v = problem.metadata.get("fleet_v")
        if fleet_v is not None:
            for k in range(core.N_LEVELS):
                if k == core.K_FULL:
                    implied = fleet_v[i][k] + y_pin[core.K_LOW] + y_pin[core.K_MID] \
                        + z_pin[k]
                else:
                    implied = fleet_v[i][k] - y_pin[k] + z_pin[k]
                uj = scoped.index_of(core.var_u(i, k))
                cap = scoped.variables[uj].ub
                if implied < 0 or implied > cap:
                    raise ScopeError(
                        f"pinning spot {i} is infeasible: implied stock "
                        f"u[{i},{core.SOC_LEVELS[k]}]={implied} outside [0, {cap:g}]")
                scoped.variables[uj].lb = float(implied)
                scoped.variables[uj].ub = float(implied)
    scoped.metadata["free_spots"] = list(keep)
    return ScopedProblem(problem, scoped, keep, pinned, pin_rows)


def routed_point(forest: Forest, problem: MipProblem, decisions: dict | None = None) -> dict:
    """Full variable assignment implied by per-coordinate decision values
    (missing coordinates default to zero): stock follows the balance rows,
    tree indicators follow the routing of the decision features.

    Used to seed solver incumbents; callers may pass pinned means so the
    scoped problem starts from its own feasible point.
    """
    decisions = decisions or {}
    n = problem.metadata["n_spots"]
    fleet_v = problem.metadata["fleet_v"]
    values = {}
    feature_values = {}
    for i in range(n):
        y_i = {}
        for k in (core.K_LOW, core.K_MID):
            coord = f"y[{i},{core.SOC_LEVELS[k]}]"
            y_i[k] = float(decisions.get(coord, 0.0))
            values[core.var_y(i, k)] = y_i[k]
            feature_values[coord] = y_i[k]
        for k in range(core.N_LEVELS):
            coord = f"z[{i},{core.SOC_LEVELS[k]}]"
            z = float(decisions.get(coord, 0.0))
            values[core.var_zp(i, k)] = max(0.0, z)
            values[core.var_zm(i, k)] = max(0.0, -z)
            feature_values[coord] = z
            if k == core.K_FULL:
                u = fleet_v[i][k] + y_i[core.K_LOW] + y_i[core.K_MID] + z
            else:
                u = fleet_v[i][k] - y_i[k] + z
            values[core.var_u(i, k)] = float(u)

    space = forest.feature_space
    x = np.zeros(space.n_features)
    for fi, feat in enumerate(space.features):
        if feat.kind == "decision":
            x[fi] = feature_values.get(feat.name, 0.0)
    for h, tree in enumerate(forest.trees):
        on_path = set()
        i = 0
        node = tree.nodes[0]
        on_path.add(0)
        while not node.is_leaf:
            i = node.left if x[node.feature] <= node.threshold else node.right
            on_path.add(i)
            node = tree.nodes[i]
        for idx, node in enumerate(tree.nodes):
            values[q_name(h, idx)] = 1.0 if idx in on_path else 0.0
    return values


def free_decision_count(problem: MipProblem, scoped: ScopedProblem | None = None):
    """Count of unpinned integer swap/move coordinates (the audit the
    locality experiments report)."""
    n = problem.metadata["n_spots"]
    total = 0
    pinned = scoped.pinned_values if scoped else {}
    for i in range(n):
        for k in (core.K_LOW, core.K_MID):
            if f"y[{i},{core.SOC_LEVELS[k]}]" not in pinned:
                total += 1
        for k in range(core.N_LEVELS):
            if f"z[{i},{core.SOC_LEVELS[k]}]" not in pinned:
                total += 1
    return total
