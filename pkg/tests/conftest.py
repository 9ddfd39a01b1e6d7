import dataclasses
import json
import os

import numpy as np
import pytest

from ebsopt.forest import TrainConfig, save, train
from ebsopt.history import build_training_set, ingest, simulate_ops, save_store
from ebsopt.model import DemandScenario, FleetState, Spot, SystemConfig
from ebsopt.synth import generate_dataset


def tiny_instance():
    """2-spot instance matching the documented arithmetic example."""
    spots = [Spot(0, 3), Spot(1, 3)]
    fleet = FleetState(np.array([[1, 1, 1], [0, 0, 2]]))
    demand = DemandScenario(np.array([2, 1]))
    config = SystemConfig(swap_cost=1, move_cost=1, penalty_medium=0.4,
                          penalty_unmet=0.8, vehicle_capacity=2,
                          battery_capacity=2, initial_full_ebikes=2)
    return config, spots, fleet, demand


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    """Ingested + simulated 6-spot store with a small trained forest."""
    root = tmp_path_factory.mktemp("small_world")
    generate_dataset(str(root), n_spots=6, n_days=80, seed=5, trips_per_day=60)
    store = ingest(os.path.join(root, "trips.csv"), os.path.join(root, "weather.csv"),
                   os.path.join(root, "stations.csv"))
    config = SystemConfig(vehicle_capacity=15, battery_capacity=20,
                          initial_full_ebikes=12)
    store.ops = simulate_ops(store, config, seed=7, fleet_size=40)
    X_train, y_train, _, _, space = build_training_set(store, config, seed=1)
    forest = train(X_train, y_train, space,
                   TrainConfig(n_trees=8, max_depth=3, min_samples_leaf=5,
                               feature_subset_fraction=0.3, seed=2))
    return store, forest, config


@pytest.fixture(scope="session")
def small_data_dir(small_world, tmp_path_factory):
    """Persisted data directory for the service and CLI tests."""
    store, forest, config = small_world
    data_dir = tmp_path_factory.mktemp("data_dir")
    save_store(store, str(data_dir / "store"))
    save(forest, str(data_dir / "forest.txt"))
    with open(data_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(config), fh)
    return str(data_dir)
