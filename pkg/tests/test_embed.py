"""Forest-to-MIP encoding, end-to-end assembly, and scope-down pinning."""

import numpy as np
import pytest

from ebsopt.embed import (
    EncodeError, ScopeError, assemble_e2e, ebs_feature_bounds, ebs_feature_map,
    embed_into, encode, free_decision_count, routed_point, scope_down,
    split_big_m, round_half_toward_zero,
)
from ebsopt.forest import Feature, FeatureSpace, Forest, Tree, TreeNode, predict_row
from ebsopt.mip import MipProblem
from ebsopt.model import FleetState, Spot, SystemConfig
from ebsopt.solver import solve


def single_split_forest(n_trees=1, lo=0, hi=3):
    space = FeatureSpace((Feature("x0", "decision", lo, hi, integral=True),))
    tree = Tree([TreeNode(0, 1.5, 1, 2), TreeNode(score=2.0), TreeNode(score=5.0)])
    return Forest([tree] * n_trees, space)


def embed_forest(forest, bounds_map):
    prob = MipProblem(metadata={"max_capacity": 10})
    fmap = {}
    for name, (lo, hi) in bounds_map.items():
        prob.add_variable(name, lo, hi, is_integer=True)
        fmap[name] = ({name: 1.0}, 0.0)
    enc = encode(forest, bounds_map)
    obj = embed_into(prob, enc, fmap)
    prob.add_objective(obj, "min")
    return prob, enc


def test_single_tree_structure_and_minimum():
    forest = single_split_forest()
    prob, enc = embed_forest(forest, {"x0": (0, 3)})
    # 3 indicators: the fixed virtual root edge plus the two children
    q_vars = [v for v in prob.variables if v.name.startswith("q[")]
    assert len(q_vars) == 3
    root = next(v for v in q_vars if v.name == "q[0,0]")
    assert root.lb == root.ub == 1.0
    big_m_rows = [r for r in prob.rows if r.name.startswith("split_")]
    assert len(big_m_rows) == 2
    sol = solve(prob)
    assert sol.status == "optimal"
    assert sol.objective_values[0] == 2.0
    assert sol.values["x0"] in (0.0, 1.0)


def test_single_leaf_tree_constant_objective():
    space = FeatureSpace((Feature("x0", "decision", 0, 3, integral=True),))
    forest = Forest([Tree([TreeNode(score=7.5)])], space)
    prob, enc = embed_forest(forest, {"x0": (0, 3)})
    sol = solve(prob)
    assert sol.status == "optimal"
    assert sol.objective_values[0] == 7.5


def test_three_shared_trees_match_predict():
    forest = single_split_forest(n_trees=3)
    prob, _ = embed_forest(forest, {"x0": (0, 3)})
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = int(rng.integers(0, 4))
        fixed = prob.copy()
        fixed.add_row("fix", {fixed.index_of("x0"): 1.0}, "==", float(x))
        sol = solve(fixed)
        assert sol.objective_values[0] == pytest.approx(
            predict_row(forest, np.array([float(x)])), abs=1e-9)


def test_context_split_rejected():
    space = FeatureSpace((Feature("x0", "decision", 0, 3, integral=True),
                          Feature("hum", "context", 0, 1)))
    tree = Tree([TreeNode(1, 0.5, 1, 2), TreeNode(score=1.0), TreeNode(score=2.0)])
    forest = Forest([tree], space)
    with pytest.raises(EncodeError):
        encode(forest, {"x0": (0, 3)})


def test_missing_bounds_rejected():
    forest = single_split_forest()
    with pytest.raises(EncodeError):
        encode(forest, {})


def test_split_big_m_arithmetic():
    assert split_big_m(1.5, 0, 3) == (1.5, 1.5)
    # threshold above the upper bound leaves the left branch always satisfiable
    assert split_big_m(5.0, 0, 3)[0] == 0.0
    m_left, m_right = split_big_m(1.5, 0.0, 3.0, integral=False)
    assert m_right == pytest.approx(1.5 + 1e-6)
    with pytest.raises(EncodeError):
        split_big_m(1.0, 0, float("inf"))


def test_tight_vs_loose_big_m_same_optimum():
    rng = np.random.default_rng(3)
    for trial in range(10):
        space = FeatureSpace(tuple(
            Feature(f"x{j}", "decision", 0, 4, integral=True) for j in range(2)))

        def random_tree(depth):
            nodes = [TreeNode()]

            def grow(i, d):
                if d == 0 or rng.random() < 0.4:
                    nodes[i] = TreeNode(score=float(rng.integers(0, 64)) / 8)
                    return
                left, right = len(nodes), len(nodes) + 1
                nodes.append(TreeNode())
                nodes.append(TreeNode())
                nodes[i] = TreeNode(int(rng.integers(0, 2)),
                                    float(rng.integers(0, 4)) + 0.5, left, right)
                grow(left, d - 1)
                grow(right, d - 1)

            grow(0, depth)
            return Tree(nodes)

        forest = Forest([random_tree(2) for _ in range(3)], space)
        bounds = {"x0": (0, 4), "x1": (0, 4)}
        tight_prob, _ = embed_forest(forest, bounds)
        tight = solve(tight_prob)

        # same encoding with a crude constant M
        loose_prob = MipProblem(metadata={"max_capacity": 10})
        fmap = {}
        for name, (lo, hi) in bounds.items():
            loose_prob.add_variable(name, lo, hi, is_integer=True)
            fmap[name] = ({name: 1.0}, 0.0)
        enc = encode(forest, bounds)
        for key in enc.big_m:
            enc.big_m[key] = (1e6, 1e6)
        rows = []
        for name, terms, sense, rhs in enc.rows:
            if name.startswith("split_le"):
                h, i = eval(name[len("split_le"):])
                thr = forest.trees[h].nodes[i].threshold
                terms = [terms[0], (terms[1][0], terms[1][1], terms[1][2], 1e6)]
                rhs = thr + 1e6
            elif name.startswith("split_ge"):
                h, i = eval(name[len("split_ge"):])
                thr = forest.trees[h].nodes[i].threshold
                terms = [terms[0], (terms[1][0], terms[1][1], terms[1][2], -1e6)]
                rhs = thr - 1e6
            rows.append((name, terms, sense, rhs))
        enc.rows = rows
        obj = embed_into(loose_prob, enc, fmap)
        loose_prob.add_objective(obj, "min")
        loose = solve(loose_prob)
        assert tight.status == loose.status == "optimal"
        assert tight.objective_values[0] == pytest.approx(loose.objective_values[0],
                                                          abs=1e-6), f"trial {trial}"


def small_core():
    config = SystemConfig(vehicle_capacity=3, battery_capacity=3, initial_full_ebikes=2)
    spots = [Spot(0, 4), Spot(1, 4)]
    fleet = FleetState(np.array([[1, 1, 1], [0, 1, 2]]))
    return config, spots, fleet


def decision_forest(n_spots, rng, n_trees=2, depth=2):
    from ebsopt.history import decision_feature_names
    names = decision_feature_names(n_spots)
    feats = []
    for name in names:
        if name.startswith("y"):
            feats.append(Feature(name, "decision", 0, 4, integral=True))
        else:
            feats.append(Feature(name, "decision", -4, 4, integral=True))
    space = FeatureSpace(tuple(feats))

    def random_tree(d):
        nodes = [TreeNode()]

        def grow(i, dd):
            if dd == 0 or rng.random() < 0.35:
                nodes[i] = TreeNode(score=float(rng.integers(0, 128)) / 8)
                return
            left, right = len(nodes), len(nodes) + 1
            nodes.append(TreeNode())
            nodes.append(TreeNode())
            f = int(rng.integers(0, len(feats)))
            thr = float(rng.integers(-2, 3)) + 0.5
            nodes[i] = TreeNode(f, thr, left, right)
            grow(left, dd - 1)
            grow(right, dd - 1)

        grow(0, d)
        return Tree(nodes)

    return Forest([random_tree(depth) for _ in range(n_trees)], space)


def test_assemble_e2e_constant_forest():
    config, spots, fleet = small_core()
    space = FeatureSpace((Feature("y[0,k1]", "decision", 0, 4, integral=True),))
    forest = Forest([Tree([TreeNode(score=3.25)])], space)
    prob = assemble_e2e(config, spots, fleet, forest)
    sol = solve(prob)
    assert sol.status == "optimal"
    assert sol.objective_values[0] == 3.25
    # demand symbols are absent from the end-to-end problem
    assert not any(v.name.startswith(("unmet", "miduse")) for v in prob.variables)
    assert not any(r.name.startswith(("demand", "capacity", "miduse")) for r in prob.rows)


def test_assemble_e2e_matches_exhaustive_minimum():
    config, spots, fleet = small_core()
    rng = np.random.default_rng(7)
    forest = decision_forest(2, rng)
    prob = assemble_e2e(config, spots, fleet, forest)
    sol = solve(prob)
    assert sol.status == "optimal"

    # independent enumeration through predict over the decision box
    from ebsopt.history import decision_feature_names
    names = decision_feature_names(2)
    best = None
    import itertools
    y_ranges = [range(int(fleet.v[i, k]) + 1) for i in range(2) for k in (0, 1)]
    for y_flat in itertools.product(*y_ranges):
        y = np.array(y_flat).reshape(2, 2)
        if y.sum() > config.battery_capacity:
            continue
        for z_flat in itertools.product(range(-2, 3), repeat=6):
            z = np.array(z_flat).reshape(2, 3)
            u0 = fleet.v[:, 0] - y[:, 0] + z[:, 0]
            u1 = fleet.v[:, 1] - y[:, 1] + z[:, 1]
            u2 = fleet.v[:, 2] + y.sum(axis=1) + z[:, 2]
            if (u0 < 0).any() or (u1 < 0).any() or (u2 < 0).any():
                continue
            if (u0 > 4).any() or (u1 > 4).any() or (u2 > 4).any():
                continue
            if z[:, 0].sum() > 0 or z[:, 1].sum() > 0:
                continue
            zk3 = z[:, 2].sum()
            if zk3 < 0 or zk3 > config.initial_full_ebikes:
                continue
            if config.initial_full_ebikes - z.sum() > config.vehicle_capacity:
                continue
            x = np.concatenate([y.ravel(), z.ravel()]).astype(float)
            value = predict_row(forest, x)
            if best is None or value < best:
                best = value
    assert sol.objective_values[0] == pytest.approx(best, abs=1e-9)


def test_assemble_infeasible_core_rejected():
    config, spots, _ = small_core()
    overfull = FleetState(np.array([[2, 2, 2], [0, 0, 2]]))
    space = FeatureSpace((Feature("y[0,k1]", "decision", 0, 4, integral=True),))
    forest = Forest([Tree([TreeNode(score=1.0)])], space)
    with pytest.raises(Exception):
        assemble_e2e(config, spots, overfull, forest)


def test_feature_bounds_from_problem():
    config, spots, fleet = small_core()
    space = FeatureSpace((Feature("y[0,k1]", "decision", 0, 4, integral=True),))
    forest = Forest([Tree([TreeNode(score=1.0)])], space)
    prob = assemble_e2e(config, spots, fleet, forest)
    fmap = ebs_feature_map(2)
    bounds = ebs_feature_bounds(prob, fmap)
    assert bounds["y[0,k1]"] == (0.0, 1.0)       # limited by today's stock
    assert bounds["z[0,k3]"] == (-4.0, 4.0)      # sign-split difference


# -- scope-down ----------------------------------------------------------------


def build_scoped_base(seed=7):
    config, spots, fleet = small_core()
    forest = decision_forest(2, np.random.default_rng(seed))
    return config, spots, fleet, assemble_e2e(config, spots, fleet, forest), forest


def test_scope_all_spots_is_noop():
    *_, base, _ = build_scoped_base()
    scoped = scope_down(base, [0, 1], {})
    assert scoped.pinned_values == {}
    assert scoped.pin_rows == []
    assert len(scoped.problem.rows) == len(base.rows)


def test_scope_empty_rejected():
    *_, base, _ = build_scoped_base()
    with pytest.raises(ScopeError):
        scope_down(base, [], {})


def test_scope_pin_outside_bounds_rejected():
    *_, base, _ = build_scoped_base()
    with pytest.raises(ScopeError) as err:
        scope_down(base, [0], {"y[1,k2]": 9.0})
    assert "y[1,k2]" in str(err.value)


def test_scope_pins_audit():
    *_, base, _ = build_scoped_base()
    # spot 1 holds v = (0, 1, 2); these pins keep its stock feasible
    means = {"y[1,k1]": 0.0, "y[1,k2]": 1.2, "z[1,k1]": 0.0, "z[1,k2]": 0.0,
             "z[1,k3]": 0.6}
    scoped = scope_down(base, [0], means)
    # one equality row per pinned coordinate, every coordinate pinned once
    assert len(scoped.pin_rows) == 5
    assert set(scoped.pinned_values) == set(means)
    pin_rows = [r for r in scoped.problem.rows if r.name.startswith("pin[")]
    assert len(pin_rows) == 5
    # pin values are the rounded means (ties toward zero)
    assert scoped.pinned_values["y[1,k2]"] == 1
    assert scoped.pinned_values["z[1,k3]"] == 1
    # free-decision audit: one free spot leaves 5 of 10 coordinates free
    assert free_decision_count(base, scoped) == 5
    assert free_decision_count(base) == 10


def test_scope_infeasible_pin_distinguished():
    *_, base, _ = build_scoped_base()
    # pinning more pickups than spot 1 holds drives its stock negative
    with pytest.raises(ScopeError) as err:
        scope_down(base, [0], {"z[1,k2]": -3.0})
    assert "u[1" in str(err.value)


def test_round_half_toward_zero():
    assert round_half_toward_zero(0.5) == 0
    assert round_half_toward_zero(-0.5) == 0
    assert round_half_toward_zero(1.5) == 1
    assert round_half_toward_zero(-1.5) == -1
    assert round_half_toward_zero(0.51) == 1
    assert round_half_toward_zero(2.0) == 2


def test_scope_monotone_objective():
    config, spots, fleet, base, forest = build_scoped_base(seed=11)
    means = {}
    full = solve(base)
    scoped = scope_down(base, [0], means)
    part = solve(scoped.problem)
    assert full.status == "optimal"
    if part.status == "optimal":
        assert part.objective_values[0] >= full.objective_values[0] - 1e-9


def test_routed_point_is_feasible_start():
    config, spots, fleet, base, forest = build_scoped_base(seed=13)
    values = routed_point(forest, base)
    vec = np.array([values[v.name] for v in base.variables])
    for row in base.rows:
        lhs = row.evaluate(vec)
        if row.sense == "<=":
            assert lhs <= row.rhs + 1e-9
        elif row.sense == ">=":
            assert lhs >= row.rhs - 1e-9
        else:
            assert lhs == pytest.approx(row.rhs, abs=1e-9)
    # objective at the routed point equals predict at the zero decision
    obj = base.objectives[0].evaluate(vec)
    x = np.zeros(forest.feature_space.n_features)
    assert obj == pytest.approx(predict_row(forest, x), abs=1e-9)
