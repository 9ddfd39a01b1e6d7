"""Acceptance criteria, one test per criterion, one printed line each.

The two long directional reproductions (the 55-spot paired timing grid and
the 600-second quadratic contrast) carry the `slow` marker; everything
else runs in seconds. Deselect with `-m "not slow"` during development.
"""

import itertools
import os
import time

import numpy as np
import pytest

from ebsopt import dsl
from ebsopt.agent import AgentConfig, MockAdapter, Query, run
from ebsopt.benchmark import ExperimentSpec, build_cell_problem, run_benchmark, run_sweep
from ebsopt.embed import embed_into, encode
from ebsopt.forest import (Feature, FeatureSpace, Forest, TrainConfig, Tree,
                           TreeNode, predict_row, train)
from ebsopt.history import build_training_set, ingest, simulate_ops
from ebsopt.metrics import (global_suboptimality, jaro_winkler,
                            local_satisfaction_gain, locality, result_similarity)
from ebsopt.mip import MipProblem
from ebsopt.model import (DemandScenario, FleetState, Spot, SystemConfig,
                          apply_inventory_balance, build_rbs, decision_from_values,
                          validate_decision)
from ebsopt.solver import SolverOptions, solve, solve_lexicographic
from ebsopt.solver.pwl import linearize_separable_quadratic
from ebsopt.synth import generate_dataset
from oracles import brute_force_rbs, decision_cost_scaled


def report(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" -- {detail}"
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# the 55-spot benchmark world (pinned recipe, rebuilt deterministically)


@pytest.fixture(scope="session")
def bench_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench55")
    generate_dataset(str(root), n_spots=55, n_days=500, seed=11,
                     trips_per_day=350, capacity_range=(8, 12))
    store = ingest(os.path.join(root, "trips.csv"), os.path.join(root, "weather.csv"),
                   os.path.join(root, "stations.csv"))
    config = SystemConfig()
    store.ops = simulate_ops(store, config, seed=4, fleet_size=280)
    X_train, y_train, _, _, space = build_training_set(store, config, seed=4)
    forest = train(X_train, y_train, space,
                   TrainConfig(n_trees=100, max_depth=3, min_samples_leaf=82,
                               feature_subset_fraction=0.08, seed=4))
    return store, forest, config


# ---------------------------------------------------------------------------
# criterion: RF->MIP oracle equivalence (50 seeded forests, exact, < 60 s)


def _random_forest_instance(rng):
    n_feat = int(rng.integers(2, 7))
    space = FeatureSpace(tuple(
        Feature(f"x{j}", "decision", 0, 5, integral=True) for j in range(n_feat)))

    def random_tree(depth):
        nodes = [TreeNode()]

        def grow(i, d):
            if d == 0 or rng.random() < 0.3:
                # dyadic scores keep float sums exact
                nodes[i] = TreeNode(score=float(rng.integers(0, 1000)) / 64.0)
                return
            left, right = len(nodes), len(nodes) + 1
            nodes.append(TreeNode())
            nodes.append(TreeNode())
            nodes[i] = TreeNode(int(rng.integers(0, n_feat)),
                                float(rng.integers(0, 5)) + 0.5, left, right)
            grow(left, d - 1)
            grow(right, d - 1)

        grow(0, depth)
        return Tree(nodes)

    n_trees = int(rng.integers(1, 6))
    forest = Forest([random_tree(int(rng.integers(1, 4))) for _ in range(n_trees)],
                    space)
    weights = rng.integers(-2, 3, n_feat)
    budget = float(rng.integers(3, 14))
    return forest, n_feat, weights, budget


def test_criterion_rf_to_mip_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for trial in range(50):
        forest, n_feat, weights, budget = _random_forest_instance(rng)
        prob = MipProblem(metadata={"max_capacity": 5})
        fmap = {}
        for j in range(n_feat):
            prob.add_variable(f"x{j}", 0, 5, is_integer=True)
            fmap[f"x{j}"] = ({f"x{j}": 1.0}, 0.0)
        encoded = encode(forest, {f"x{j}": (0, 5) for j in range(n_feat)})
        objective = embed_into(prob, encoded, fmap)
        prob.add_row("side", {j: float(weights[j]) for j in range(n_feat)
                              if weights[j]}, "<=", budget)
        prob.add_objective(objective, "min")
        sol = solve(prob)

        best = None
        for x in itertools.product(range(6), repeat=n_feat):
            if sum(weights[j] * x[j] for j in range(n_feat)) > budget:
                continue
            value = predict_row(forest, np.array(x, dtype=float))
            if best is None or value < best:
                best = value
        assert sol.status == "optimal", f"trial {trial}: {sol.status}"
        x_star = np.array([sol.values[f"x{j}"] for j in range(n_feat)])
        assert predict_row(forest, x_star) == best, f"trial {trial}"
    elapsed = time.perf_counter() - t0
    report("RF->MIP oracle equivalence (50 forests, exact)", elapsed < 60,
           f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion: deterministic RBS correctness (20 seeded instances, exact)


def test_criterion_rbs_brute_force():
    rng = np.random.default_rng(77)
    for trial in range(20):
        n = int(rng.integers(2, 4))
        caps = rng.integers(2, 5, n)
        v = np.array([[rng.integers(0, min(3, caps[i]) + 1) for _ in range(3)]
                      for i in range(n)])
        while any(v[i].sum() > caps[i] for i in range(n)):
            v = np.maximum(0, v - 1)
        spots = [Spot(i, int(caps[i])) for i in range(n)]
        fleet = FleetState(v)
        demand = DemandScenario(rng.integers(0, 4, n))
        zmax = int(rng.integers(1, 3))
        config = SystemConfig(
            swap_cost=float(rng.choice([0.5, 1.0, 1.5])),
            move_cost=float(rng.choice([0.5, 1.0])),
            penalty_medium=0.4, penalty_unmet=0.8,
            vehicle_capacity=zmax, battery_capacity=int(rng.integers(1, 5)),
            initial_full_ebikes=int(rng.integers(0, zmax + 1)))
        best, _ = brute_force_rbs(config, spots, fleet, demand, zmax=zmax)
        assert best is not None, f"trial {trial}: oracle found nothing feasible"

        prob = build_rbs(config, spots, fleet, demand)
        # align the solver's move box with the oracle's enumeration box
        for i in range(n):
            for k in ("k1", "k2", "k3"):
                for part in ("zp", "zm"):
                    var = prob.variables[prob.index_of(f"{part}[{i},{k}]")]
                    var.ub = min(var.ub, float(zmax))
        sol = solve(prob)
        assert sol.status == "optimal", f"trial {trial}: {sol.status}"
        dec = decision_from_values(sol.values, n)
        assert decision_cost_scaled(config, dec) == best, f"trial {trial}"
        assert abs(sol.objective_values[0] - best / 20) <= 1e-9, f"trial {trial}"
        rep = validate_decision(config, spots, fleet, demand, dec)
        assert rep.feasible, f"trial {trial}: {rep}"
        assert np.array_equal(dec.u, apply_inventory_balance(fleet, dec.y, dec.z))
    report("deterministic RBS equals brute force (20 instances, exact)", True)


# ---------------------------------------------------------------------------
# criterion: PWL exactness for every integer point, all objective families


def _fragment_value(frag, vec):
    """Value of the emitted PWL expression at the packed fill assignment."""
    aux = frag.assign(vec)
    total = frag.value_constant
    for ref, coef in frag.value_terms:
        total += coef * aux[ref[1]]
    return total


def test_criterion_pwl_exactness():
    """For every integer point of each term's range, the emitted fragment
    expression evaluates to the quadratic exactly, on a 4-spot instance and
    both quadratic objective families."""
    uni = dsl.Universe(4, capacities=(4, 4, 4, 4))
    prob = MipProblem(metadata={"max_capacity": 4, "n_spots": 4})
    for i in range(4):
        for k in ("k1", "k2"):
            prob.add_variable(f"y[{i},{k}]", 0, 3, True)
        for k in ("k1", "k2", "k3"):
            prob.add_variable(f"zp[{i},{k}]", 0, 4, True)
            prob.add_variable(f"zm[{i},{k}]", 0, 4, True)
            prob.add_variable(f"u[{i},{k}]", 0, 4, True)

    families = [
        "minimize sum((sum(u[i,k] for k in K) - C[i])^2 for i in I)",
        "minimize sum(y[i,k]^2 + z[i,k]^2 for i in I, k in {k1,k2})",
    ]
    checked = 0
    for text in families:
        form = dsl.canonicalize(dsl.parse(text), uni)
        _coeffs, _const, fragments = dsl.to_objective(form, prob)
        frag = fragments[0]
        for term_index, ((coef, flat, const), (lo, hi)) in enumerate(
                zip(frag.terms, frag.breakpoints)):
            for t in range(lo, hi + 1):
                # craft a point where this term's aggregate equals t and
                # every other aggregate sits at a valid value
                vec = np.zeros(prob.n_variables)
                remaining = t - const
                for j, c in sorted(flat.items()):
                    var = prob.variables[j]
                    if c > 0:
                        step = min(var.ub, remaining) if remaining > 0 else 0.0
                        vec[j] = step
                        remaining -= step
                    elif c < 0 and remaining < 0:
                        step = min(var.ub, -remaining)
                        vec[j] = step
                        remaining += step
                assert remaining == 0, (text, term_index, t)
                expected = sum(cf * (sum(ff.get(j, 0) * vec[j] for j in ff) + cc) ** 2
                               for cf, ff, cc in frag.terms)
                assert frag.evaluate(vec) == expected
                assert _fragment_value(frag, vec) == expected, (text, term_index, t)
                checked += 1
    report("PWL exactness at every integer point (both quadratic families)",
           True, f"{checked} points checked")


def test_criterion_pwl_exactness_through_solver():
    """Solver-level confirmation: fix the auxiliary at each integer value
    and confirm the optimized fragment value equals the square under both
    optimization senses (the ordering binaries make it forced)."""
    prob = MipProblem(metadata={"max_capacity": 4})
    u = [prob.add_variable(f"u{i}", 0, 4, True) for i in range(3)]
    frag = linearize_separable_quadratic([(1.0, {u[0]: 1.0, u[1]: 1.0, u[2]: 1.0}, -4.0)],
                                         prob)
    for total in range(0, 13):
        for sense in ("min", "max"):
            p2 = prob.copy()
            p2.add_row("fix", {j: 1.0 for j in u}, "==", float(total))
            p2.add_objective({}, sense, fragments=[frag])
            sol = solve(p2)
            assert sol.status == "optimal"
            assert sol.objective_values[0] == (total - 4) ** 2, (total, sense)
    report("PWL exactness confirmed through the solver (min and max senses)", True)


# ---------------------------------------------------------------------------
# criterion: locality and metric formulas


def test_criterion_locality_formula():
    value = locality(17, 55)
    report("locality(17, 55) = 30.91%", abs(value * 100 - 30.91) <= 0.01,
           f"{value * 100:.4f}%")


def test_criterion_metric_formulas():
    ok = True
    ok &= global_suboptimality(100.62, 100.0) == pytest.approx(0.0062)
    ok &= local_satisfaction_gain(104.08, 100.0, "maximize") == pytest.approx(0.0408)
    ok &= local_satisfaction_gain(96.30, 100.0, "minimize") == pytest.approx(0.0370)
    ok &= abs(jaro_winkler("MARTHA", "MARHTA") - 0.9611) <= 1e-4
    uni = dsl.Universe(55, capacities=(12,) * 55)
    a = dsl.canonicalize(dsl.parse(
        "maximize sum(u[i,k] for i in I, k in {k2,k3})"), uni)
    b = dsl.canonicalize(dsl.parse(
        "maximize sum(sum(u[i,k] for k in K if k >= k2) for i in I)"), uni)
    ok &= result_similarity(a, b) == 1.0
    report("metric formulas (suboptimality, gain, Jaro-Winkler, similarity)", bool(ok))


# ---------------------------------------------------------------------------
# criterion: directional locality-grid reproduction (55 spots, paired runs)


@pytest.mark.slow
def test_criterion_locality_grid_directional(bench_world):
    store, forest, config = bench_world
    spec = ExperimentSpec(locality_grid=(0.2, 0.4, 0.6, 0.8), repetitions=10,
                          keep_relevant=3, time_limit=20, rel_gap=0.01)
    t0 = time.perf_counter()
    bench = run_benchmark(spec, store, forest, config)
    elapsed = time.perf_counter() - t0

    rows = bench.rows()
    medians_ok = all(r["cpu_scoped_median"] <= r["cpu_full_median"] for r in rows)
    detail_medians = ", ".join(
        f"{r['locality']:.0%}: {r['cpu_scoped_median']:.3f}s<= {r['cpu_full_median']:.3f}s"
        for r in rows)
    report("locality grid (a): scoped median wall time <= unscoped median",
           medians_ok, detail_medians)

    optimal_cells = [c for c in bench.cells
                     if c.report.scoped_status == "optimal"
                     and c.report.full_status == "optimal"
                     and c.report.global_suboptimality is not None]
    gs_ok = all(0.0 <= c.report.global_suboptimality <= 0.05 for c in optimal_cells)
    report("locality grid (b): 0 <= global suboptimality <= 5% on optimal cells",
           gs_ok and len(optimal_cells) > 0,
           f"{len(optimal_cells)} optimal cells, "
           f"max {max((c.report.global_suboptimality for c in optimal_cells), default=0):.4f}")

    counts_ok = all(c.free_decisions_scoped < c.free_decisions_full
                    for c in bench.cells)
    report("locality grid (c): scoped free-decision count strictly smaller",
           counts_ok)

    report("locality grid harness runtime <= 30 minutes", elapsed <= 1800,
           f"{elapsed:.0f}s")

    # lexicographic contract on every exactly-closed cell of the grid
    return None


@pytest.mark.slow
def test_criterion_lexicographic_contract(bench_world, small_world):
    """Every cell solved with zero slack: the final solution's stage-1
    value never exceeds V1 (solver-asserted cap), and on exactly closed
    cells it equals V1 within 1e-6, independently recomputed."""
    worst_eq = 0.0
    worst_cap = -float("inf")
    exact_cells = 0
    all_cells = 0

    def examine(problem, sol):
        nonlocal worst_eq, worst_cap, exact_cells, all_cells
        if not sol.ok:
            return
        obj1 = sorted(problem.objectives, key=lambda o: o.priority)[0]
        vec = np.array([sol.values[v.name] for v in problem.variables])
        recomputed = obj1.evaluate(vec)
        all_cells += 1
        worst_cap = max(worst_cap, recomputed - sol.stage1_optimum)
        if sol.status == "optimal" and sol.gap == 0.0:
            exact_cells += 1
            worst_eq = max(worst_eq, abs(recomputed - sol.stage1_optimum),
                           abs(sol.objective_values[0] - sol.stage1_optimum))

    store, forest, config = bench_world
    rng = np.random.default_rng(5)
    for loc in (0.2, 0.6):
        declared = sorted(rng.choice(55, size=max(1, round(loc * 55)),
                                     replace=False).tolist())
        problem, *_rest, warm = build_cell_problem(
            store, forest, config, declared, "linear", 3, scoped=True)
        examine(problem, solve_lexicographic(
            problem, SolverOptions(rel_gap=1e-6, time_limit=120), warm))
        problem, *_rest, warm = build_cell_problem(
            store, forest, config, declared, "linear", 3, scoped=False)
        examine(problem, solve_lexicographic(
            problem, SolverOptions(rel_gap=0.01, time_limit=60), warm))

    s_store, s_forest, s_config = small_world
    for declared in ([0], [1, 2], [3, 4, 5]):
        for scoped in (True, False):
            problem, *_rest, warm = build_cell_problem(
                s_store, s_forest, s_config, declared, "linear", 1, scoped=scoped)
            examine(problem, solve_lexicographic(
                problem, SolverOptions(rel_gap=1e-6, time_limit=60), warm))

    report("lexicographic contract: final stage-1 value equals V1 within 1e-6",
           exact_cells >= 4 and worst_eq <= 1e-6,
           f"{exact_cells} exact cells, worst |diff| {worst_eq:.2e}")
    report("lexicographic contract: stage-1 cap holds on every cell",
           all_cells >= exact_cells and worst_cap <= 1e-6,
           f"{all_cells} cells, worst overshoot {worst_cap:.2e}")


# ---------------------------------------------------------------------------
# criterion: directional quadratic contrast at a 600 s limit


@pytest.mark.slow
def test_criterion_quadratic_contrast(bench_world):
    store, forest, config = bench_world
    rng = np.random.default_rng(0)
    declared = sorted(rng.choice(55, size=11, replace=False).tolist())

    scoped_problem, *_r1, scoped_warm = build_cell_problem(
        store, forest, config, declared, "quad-utilization", 0, scoped=True)
    scoped_sol = solve_lexicographic(
        scoped_problem, SolverOptions(rel_gap=1e-6, time_limit=600), scoped_warm)

    full_problem, *_r2, full_warm = build_cell_problem(
        store, forest, config, declared, "quad-utilization", 0, scoped=False)
    full_sol = solve_lexicographic(
        full_problem, SolverOptions(rel_gap=1e-6, time_limit=600), full_warm)

    report("quadratic contrast: scoped 20%-locality cell returns optimal",
           scoped_sol.status == "optimal",
           f"{scoped_sol.status} in {scoped_sol.wall_time:.1f}s")
    report("quadratic contrast: unscoped cell fails to close at 600 s",
           full_sol.status != "optimal",
           f"{full_sol.status}, gap {full_sol.gap:.3%}")


@pytest.mark.slow
def test_agent_run_at_benchmark_scale(bench_world):
    """Agent run at 40% locality on the 55-spot instance: the trace's
    free-decision counts match the scope audit, and the whole run's solver
    time stays under a single unscoped lexicographic solve."""
    store, forest, config = bench_world
    rng = np.random.default_rng(1)
    declared = sorted(rng.choice(55, size=22, replace=False).tolist())
    cap = 55 - 22 - 3
    t0 = time.perf_counter()
    response, trace = run(Query("increase available e-bikes",
                                declared_spots=tuple(declared)),
                          store, forest, MockAdapter(),
                          AgentConfig(max_parameterized_spots=cap,
                                      solver=SolverOptions(rel_gap=0.01,
                                                           time_limit=60)),
                          system_config=config)
    agent_solver_time = sum(it.wall_time for it in trace.iterations)
    assert trace.final_status != "failed", trace.error

    audit_ok = all(
        it.free_decisions == len(it.free_spots) * 5 + 0  # y(2) + z(3) per free spot
        for it in trace.iterations)
    report("agent trace free-decision counts match the scope audit", audit_ok,
           f"{[it.free_decisions for it in trace.iterations]}")

    full_times = []
    for _ in range(3):
        problem, *_rest, warm = build_cell_problem(
            store, forest, config, declared, "linear", 3, scoped=False)
        sol = solve_lexicographic(problem, SolverOptions(rel_gap=0.01,
                                                         time_limit=60), warm)
        full_times.append(sol.wall_time)
    full_median = sorted(full_times)[1]
    report("agent run solver time below one unscoped solve",
           agent_solver_time < full_median,
           f"agent {agent_solver_time:.3f}s vs unscoped {full_median:.3f}s")


# ---------------------------------------------------------------------------
# criterion: parameterization-cap sweep trend


def test_criterion_sweep_monotone(bench_world):
    store, _forest, _config = bench_world
    spec = ExperimentSpec(max_parameterized_sweep=(10, 25, 40, 55))
    rows = run_sweep(spec, store, queries_per_cap=20)
    stats = [r.stats() for r in rows]
    means = [s["mean"] for s in stats]
    medians = [s["median"] for s in stats]
    ok = means == sorted(means) and medians == sorted(medians)
    report("cap sweep: mean and median parameterized counts non-decreasing",
           ok, f"means {['%.1f' % m for m in means]}")


# ---------------------------------------------------------------------------
# criterion: agent loop invariants over 100 seeded runs


def test_criterion_agent_loop_invariants(small_world):
    store, forest, config = small_world
    rng = np.random.default_rng(99)
    declared_ok = True
    invocations_ok = True
    for trial in range(100):
        declared = sorted(rng.choice(store.n_spots,
                                     size=int(rng.integers(1, 3)),
                                     replace=False).tolist())
        cap = int(rng.integers(0, store.n_spots - len(declared) + 1))
        query = Query("increase available e-bikes", declared_spots=tuple(declared))
        _resp, trace = run(query, store, forest, MockAdapter(),
                           AgentConfig(max_parameterized_spots=cap),
                           system_config=config)
        assert trace.final_status != "failed", trace.error
        for it in trace.iterations:
            if set(declared) & set(it.parameterized):
                declared_ok = False
        if sum(it.solver_invocations for it in trace.iterations) \
                != 2 * len(trace.iterations):
            invocations_ok = False
    report("agent loop: declared spots never parameterized (100 runs)", declared_ok)
    report("agent loop: solver invocations = 2 x iterations", invocations_ok)

    # bit reproducibility of everything except wall clocks
    def stripped(trace):
        payload = trace.to_dict()
        for it in payload["iterations"]:
            it.pop("wall_time")
        return payload

    query = Query("increase available e-bikes at spots 1 and 2")
    r1, t1 = run(query, store, forest, MockAdapter(),
                 AgentConfig(max_parameterized_spots=3), system_config=config)
    r2, t2 = run(query, store, forest, MockAdapter(),
                 AgentConfig(max_parameterized_spots=3), system_config=config)
    same = stripped(t1) == stripped(t2) and r1.qr_objective == r2.qr_objective \
        and r1.cost_objective == r2.cost_objective and r1.decisions == r2.decisions
    report("agent loop: mock runs bit-reproducible (wall clocks excluded)", same)


# ---------------------------------------------------------------------------
# criterion: public-dataset ingest check (skipped without the extract)


def test_criterion_pronto_ingest():
    pronto = os.environ.get("EBSOPT_PRONTO_DIR")
    if not pronto:
        print("[SKIP] public-extract ingest check -- set EBSOPT_PRONTO_DIR "
              "to the directory holding trip/weather/station CSVs", flush=True)
        pytest.skip("public dataset not available")
    trips = os.path.join(pronto, "trip.csv")
    weather = os.path.join(pronto, "weather.csv")
    stations = os.path.join(pronto, "station.csv")
    store = ingest(trips, weather, stations)
    report("public extract: accepted trip rows = 283,143",
           store.n_trips == 283_143, f"accepted {store.n_trips}")
