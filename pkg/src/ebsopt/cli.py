"""Command-line interface.

Typical flow: `synth` (or real CSVs) -> `prepare` -> `query` / `serve` /
`benchmark`. The prepare step writes a data directory holding the
persisted store, the trained forest, and the system configuration, which
the service and the other commands load.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .model import SystemConfig


def _load_data_dir(data_dir):
    from .forest import load as load_forest
    from .history import load_store

    store = load_store(os.path.join(data_dir, "store"))
    forest = load_forest(os.path.join(data_dir, "forest.txt"))
    config_path = os.path.join(data_dir, "config.json")
    config = SystemConfig()
    if os.path.exists(config_path):
        with open(config_path, encoding="utf-8") as fh:
            config = SystemConfig(**json.load(fh))
    return store, forest, config


def cmd_synth(args):
    from .synth import generate_dataset

    paths = generate_dataset(args.out, n_spots=args.spots, n_days=args.days,
                             seed=args.seed, trips_per_day=args.trips_per_day)
    for p in paths:
        print(p)


def cmd_prepare(args):
    from .forest import TrainConfig, save, train
    from .history import build_training_set, ingest, save_store, simulate_ops

    config = SystemConfig(
        vehicle_capacity=args.vehicle_capacity,
        battery_capacity=args.battery_capacity,
        initial_full_ebikes=args.initial_full,
    )
    store = ingest(args.trips, args.weather, args.stations)
    print("ingest:", store.manifest())
    store.ops = simulate_ops(store, config, horizon=args.horizon, seed=args.seed,
                             fleet_size=args.fleet)
    print(f"simulated {len(store.ops)} operating days")
    X_train, y_train, X_test, y_test, space = build_training_set(
        store, config, seed=args.seed)
    forest = train(X_train, y_train, space, TrainConfig(
        n_trees=args.trees, max_depth=args.depth,
        min_samples_leaf=args.min_leaf, seed=args.seed))
    print(f"trained {forest.n_trees} trees; "
          f"train R2 {float(forest.metadata['train_r2']):.3f}, "
          f"oob R2 {float(forest.metadata.get('oob_r2', 'nan')):.3f}")
    os.makedirs(args.out, exist_ok=True)
    save_store(store, os.path.join(args.out, "store"))
    save(forest, os.path.join(args.out, "forest.txt"))
    with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(config), fh, indent=1)
    print("data directory ready:", args.out)


def cmd_query(args):
    from .agent import AgentConfig, MockAdapter, Query, run
    from .solver import SolverOptions

    store, forest, config = _load_data_dir(args.data)
    adapter = MockAdapter()
    if args.adapter == "live":
        from .agent import LiveHttpAdapter
        adapter = LiveHttpAdapter()
    declared = tuple(int(s) for s in args.spots.split(",")) if args.spots else None
    query = Query(args.text, declared, args.max_parameterized)
    agent_config = AgentConfig(solver=SolverOptions(time_limit=args.time_limit,
                                                    rel_gap=1e-6))
    response, trace = run(query, store, forest, adapter, agent_config,
                          system_config=config)
    print(f"status: {response.status}")
    print(response.explanation)
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write(trace.to_text())
        print("trace written to", args.trace_out)
    return 0 if response.status != "failed" else 1


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(args.data, workers=args.workers, console_dist=args.console_dist)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


def cmd_benchmark(args):
    from .benchmark import ExperimentSpec, run_benchmark

    store, forest, config = _load_data_dir(args.data)
    spec = ExperimentSpec(
        locality_grid=tuple(float(x) for x in args.localities.split(",")),
        objective_family=args.family,
        repetitions=args.reps,
        seed=args.seed,
        keep_relevant=args.keep_relevant,
        time_limit=args.time_limit,
    )
    def progress(cell):
        r = cell.report
        print(f"  locality {cell.locality:.0%} rep {cell.repetition}: "
              f"scoped {r.cpu_time_scoped:.2f}s ({r.scoped_status}) "
              f"full {r.cpu_time_full:.2f}s ({r.full_status})", flush=True)

    report = run_benchmark(spec, store, forest, config, progress=progress)
    print(report.render_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        print("csv written to", args.out)


def cmd_sweep(args):
    from .benchmark import ExperimentSpec, run_sweep, sweep_to_csv

    store, _forest, _config = _load_data_dir(args.data)
    spec = ExperimentSpec(
        max_parameterized_sweep=tuple(int(x) for x in args.caps.split(",")),
        seed=args.seed,
    )
    rows = run_sweep(spec, store, queries_per_cap=args.queries)
    csv_text = sweep_to_csv(rows)
    print(csv_text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)


def cmd_export_lp(args):
    from .agent import instance_from_store
    from .embed import assemble_e2e
    from .forest import partial_evaluate
    from .model import DemandScenario, build_rbs

    store, forest, config = _load_data_dir(args.data)
    fleet, context = instance_from_store(store, config)
    if args.model == "e2e":
        problem = assemble_e2e(config, store.spots, fleet, partial_evaluate(forest, context))
    else:
        demand = DemandScenario([0] * store.n_spots)
        problem = build_rbs(config, store.spots, fleet, demand)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(problem.to_lp_text())
    print(f"{args.model} model: {problem.n_variables} columns, "
          f"{len(problem.rows)} rows -> {args.out}")


def cmd_ingest_check(args):
    from .history import ingest

    store = ingest(args.trips, args.weather, args.stations)
    print(json.dumps(store.manifest(), indent=1))


def cmd_bench_kernels(args):
    from .solver.bench import bench_kernels, render

    print(render(bench_kernels(m=args.rows, n_struct=args.cols, pivots=args.pivots)))


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ebsopt",
                                     description="query-steerable e-bike rebalancing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic input CSVs")
    p.add_argument("--out", required=True)
    p.add_argument("--spots", type=int, default=12)
    p.add_argument("--days", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trips-per-day", type=float, default=40.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="ingest, simulate, train, persist")
    p.add_argument("--trips", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--min-leaf", type=int, default=8)
    p.add_argument("--fleet", type=int, default=500)
    p.add_argument("--vehicle-capacity", type=int, default=60)
    p.add_argument("--battery-capacity", type=int, default=142)
    p.add_argument("--initial-full", type=int, default=60)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("query", help="run one agent query")
    p.add_argument("text")
    p.add_argument("--data", required=True)
    p.add_argument("--spots", default=None, help="comma-separated 0-based ids")
    p.add_argument("--max-parameterized", type=int, default=None)
    p.add_argument("--adapter", choices=("mock", "live"), default="mock")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--console-dist", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("benchmark", help="scoped-vs-unscoped grid")
    p.add_argument("--data", required=True)
    p.add_argument("--family", choices=("linear", "quad-utilization", "quad-turnover"),
                   default="linear")
    p.add_argument("--localities", default="0.2,0.4,0.6,0.8")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keep-relevant", type=int, default=5)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="parameterization-cap sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--caps", default="10,25,40,55")
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-lp", help="write the LP-style text model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("rbs", "e2e"), default="e2e")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("ingest-check", help="ingest CSVs and print the manifest")
    p.add_argument("--trips", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--stations", required=True)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("bench-kernels", help="compiled vs fallback pivot benchmark")
    p.add_argument("--rows", type=int, default=600)
    p.add_argument("--cols", type=int, default=900)
    p.add_argument("--pivots", type=int, default=150)
    p.set_defaults(func=cmd_bench_kernels)

    args = parser.parse_args(argv)
    result = args.func(args)
    return result or 0


if __name__ == "__main__":
    sys.exit(main())
