"""Historical data: CSV ingest, operations simulation, training table,
parameterization means, and the constrained query interface the problem
tailor uses instead of free-form SQL.

CSV schemas (header required):

* trips:    trip_id,start_station,end_station,start_time,stop_time,distance
* weather:  date,temp,humidity,visibility
* stations: id,name,lat,lon,dock_count

Station ids may be arbitrary tokens; they are mapped to dense spot indices
in file order. Trips referencing unknown stations or with negative duration
are quarantined, not fatal.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from datetime import date as date_type
from datetime import datetime

import numpy as np

from .model import (
    K_FULL, K_LOW, K_MID, N_LEVELS, SOC_LEVELS, DecisionVector, DemandScenario,
    FleetState, Spot, SystemConfig, apply_inventory_balance, rbs_cost,
)
from .forest import Feature, FeatureSpace

NOON_START_HOUR = 11
NOON_END_HOUR = 14          # window is [11:00, 14:00)
SOC_DROP_PER_TRIP = 0.03    # battery fraction per trip
BUCKET_WIDTH = 0.40         # k2 spans 30%..70%

_TIME_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%m/%d/%Y %H:%M", "%m/%d/%y %H:%M")
_DATE_FORMATS = ("%Y-%m-%d", "%m/%d/%Y", "%m/%d/%y")


class IngestError(ValueError):
    pass


class QueryError(ValueError):
    pass


def _parse_time(raw, path, lineno):
    for fmt in _TIME_FORMATS:
        try:
            return datetime.strptime(raw, fmt)
        except ValueError:
            continue
    raise IngestError(f"{path}:{lineno}: unparseable timestamp {raw!r}")


def _parse_date(raw, path, lineno):
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(raw, fmt).date()
        except ValueError:
            continue
    raise IngestError(f"{path}:{lineno}: unparseable date {raw!r}")


def _reader(path, required):
    if not os.path.exists(path):
        raise IngestError(f"missing file: {path}")
    fh = open(path, encoding="utf-8-sig", newline="")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    for col in required:
        if col not in header:
            fh.close()
            raise IngestError(f"{path}: schema mismatch, missing column {col!r}")
    return fh, reader


@dataclass
class OpsRecord:
    """One simulated operating day; satisfies the balance equations by
    construction (asserted in tests). ``recent_demand`` is the trailing
    week's mean noon demand, known before the day's decisions."""

    date: date_type
    v: np.ndarray
    y: np.ndarray
    z: np.ndarray
    u: np.ndarray
    demand: np.ndarray
    sigma: np.ndarray
    miduse: np.ndarray
    cost: float
    recent_demand: float = 0.0


@dataclass
class Store:
    spots: list
    station_names: list
    station_tokens: list
    trip_start: np.ndarray      # spot index per accepted trip
    trip_end: np.ndarray
    trip_times: list            # datetime per accepted trip (sorted)
    trip_distance: np.ndarray
    weather: dict               # date -> (temp, humidity, visibility)
    quarantined: int
    ops: list = field(default_factory=list)

    @property
    def n_spots(self):
        return len(self.spots)

    @property
    def n_trips(self):
        return len(self.trip_start)

    def manifest(self) -> dict:
        return {
            "stations": len(self.spots),
            "trips_accepted": self.n_trips,
            "trips_quarantined": self.quarantined,
            "weather_days": len(self.weather),
            "ops_records": len(self.ops),
        }


def ingest(trips_path, weather_path, stations_path) -> Store:
    """Load the three CSVs, enforcing referential integrity."""
    fh, reader = _reader(stations_path, ("id", "name", "lat", "lon", "dock_count"))
    spots, names, tokens = [], [], []
    with fh:
        for lineno, row in enumerate(reader, 2):
            tokens.append(row["id"].strip())
            names.append(row["name"].strip())
            spots.append(Spot(len(spots), int(float(row["dock_count"])),
                              float(row["lat"]), float(row["lon"])))
    if not spots:
        raise IngestError(f"{stations_path}: no station rows")
    index = {tok: i for tok, i in zip(tokens, range(len(tokens)))}

    fh, reader = _reader(weather_path, ("date", "temp", "humidity", "visibility"))
    weather = {}
    with fh:
        for lineno, row in enumerate(reader, 2):
            day = _parse_date(row["date"].strip(), weather_path, lineno)
            if day in weather:
                raise IngestError(f"{weather_path}:{lineno}: duplicate date {day}")
            weather[day] = (float(row["temp"]), float(row["humidity"]),
                            float(row["visibility"]))
    if not weather:
        raise IngestError(f"{weather_path}: no weather rows")

    fh, reader = _reader(trips_path, ("trip_id", "start_station", "end_station",
                                      "start_time", "stop_time", "distance"))
    start, end, times, dist = [], [], [], []
    quarantined = 0
    with fh:
        for lineno, row in enumerate(reader, 2):
            s_tok = row["start_station"].strip()
            e_tok = row["end_station"].strip()
            if s_tok not in index or e_tok not in index:
                quarantined += 1
                continue
            t0 = _parse_time(row["start_time"].strip(), trips_path, lineno)
            t1 = _parse_time(row["stop_time"].strip(), trips_path, lineno)
            if t1 < t0:
                quarantined += 1
                continue
            start.append(index[s_tok])
            end.append(index[e_tok])
            times.append(t0)
            dist.append(float(row["distance"] or 0.0))
    if not start:
        raise IngestError(f"{trips_path}: no valid trip rows")

    order = sorted(range(len(times)), key=lambda i: (times[i], i))
    return Store(
        spots=spots, station_names=names, station_tokens=tokens,
        trip_start=np.array([start[i] for i in order], dtype=np.int64),
        trip_end=np.array([end[i] for i in order], dtype=np.int64),
        trip_times=[times[i] for i in order],
        trip_distance=np.array([dist[i] for i in order]),
        weather=weather, quarantined=quarantined,
    )


# ---------------------------------------------------------------------------
# operations simulation


def _initial_state(store, fleet_size, rng):
    caps = np.array([s.capacity for s in store.spots], dtype=np.int64)
    fill = np.minimum((caps * fleet_size) // max(1, caps.sum()), caps)
    v = np.zeros((store.n_spots, N_LEVELS), dtype=np.int64)
    for i, total in enumerate(fill):
        # fresh fleet skews to high charge
        k3 = int(round(total * 0.5))
        k2 = int(round(total * 0.3))
        v[i] = (total - k3 - k2, k2, k3)
    return v


def _apply_trip(v, origin, dest, caps, rng):
    """Move one bike origin -> dest, draining charge stochastically."""
    if v[dest].sum() >= caps[dest]:
        return False  # destination full: rental refused
    for k in (K_FULL, K_MID):  # low-charge bikes are not rented out
        if v[origin, k] > 0:
            v[origin, k] -= 1
            drop = rng.random() < SOC_DROP_PER_TRIP / BUCKET_WIDTH
            v[dest, k - 1 if drop else k] += 1
            return True
    return False


def _rebalance_heuristic(v, demand, config, caps, served_spots=6, pickup_spots=4):
    """Proportional top-up toward demand, truncated by the vehicle, battery,
    and net-flow limits. The crew visits only the worst few spots per day
    (one vehicle, one noon window). Zero demand means a quiet day."""
    n = len(caps)
    y = np.zeros((n, 2), dtype=np.int64)
    z = np.zeros((n, N_LEVELS), dtype=np.int64)
    if demand.sum() == 0:
        return y, z

    # swap depleted batteries where demand presses on low stock
    budget = config.battery_capacity
    order = sorted(range(n), key=lambda i: (-(demand[i] * (v[i, K_LOW] + v[i, K_MID])), i))
    for i in order[:served_spots]:
        if budget <= 0 or demand[i] == 0:
            break
        take = min(int(v[i, K_LOW]), budget)
        y[i, K_LOW] = take
        budget -= take
    for i in order[:served_spots]:
        if budget <= 0:
            break
        if demand[i] > 0 and v[i, K_MID] > 0:
            take = min(int(v[i, K_MID]), budget, int(demand[i]))
            y[i, K_MID] = take
            budget -= take

    # drop full bikes at the worst deficit spots
    u_after_swaps = v.copy()
    u_after_swaps[:, K_LOW] -= y[:, K_LOW]
    u_after_swaps[:, K_MID] -= y[:, K_MID]
    u_after_swaps[:, K_FULL] += y.sum(axis=1)
    stock = config.initial_full_ebikes
    dropped = 0
    deficits = sorted(range(n), key=lambda i: (-(demand[i] - u_after_swaps[i, K_MID]
                                                 - u_after_swaps[i, K_FULL]), i))
    for i in deficits[:served_spots]:
        need = int(demand[i] - u_after_swaps[i, K_MID] - u_after_swaps[i, K_FULL])
        space = int(caps[i] - (v[i].sum() + z[i].sum()))
        give = max(0, min(need, space, stock - dropped))
        if give > 0:
            z[i, K_FULL] = give
            dropped += give

    # pickups: clear low-charge bikes from the most saturated spots while
    # the vehicle still has room; keeps sum(z_k1) <= 0 trivially true
    load = config.initial_full_ebikes - int(z.sum())
    crowded = sorted(range(n), key=lambda i: (-(v[i].sum() / max(1, caps[i])), i))
    for i in crowded[:pickup_spots]:
        if load >= config.vehicle_capacity:
            break
        if v[i].sum() >= 0.9 * caps[i] and v[i, K_LOW] > y[i, K_LOW]:
            take = min(int(v[i, K_LOW] - y[i, K_LOW]),
                       int(config.vehicle_capacity - load))
            z[i, K_LOW] -= take
            load += take
    return y, z


def simulate_ops(store: Store, config: SystemConfig, horizon=None, seed=0,
                 fleet_size=500) -> list:
    """Replay trips day by day, inserting a noon rebalancing/swap action.

    State persists across days; balance holds in every record by
    construction. Deterministic for a fixed seed.
    """
    if config.initial_full_ebikes > config.vehicle_capacity:
        raise IngestError("simulation heuristic requires the vehicle to start "
                          "within its own capacity (initial_full_ebikes <= vehicle_capacity)")
    rng = np.random.default_rng(seed)
    caps = np.array([s.capacity for s in store.spots], dtype=np.int64)
    v = _initial_state(store, fleet_size, rng)

    days = sorted({t.date() for t in store.trip_times} & set(store.weather))
    if horizon is not None:
        days = days[:horizon]
    by_day = {}
    for idx, t in enumerate(store.trip_times):
        by_day.setdefault(t.date(), []).append(idx)

    records = []
    trailing = []
    for day in days:
        idxs = by_day.get(day, [])
        morning = [i for i in idxs if store.trip_times[i].hour < NOON_START_HOUR]
        window = [i for i in idxs if NOON_START_HOUR <= store.trip_times[i].hour < NOON_END_HOUR]
        rest = [i for i in idxs if store.trip_times[i].hour >= NOON_START_HOUR]
        for i in morning:
            _apply_trip(v, store.trip_start[i], store.trip_end[i], caps, rng)

        v_snapshot = v.copy()
        demand = np.zeros(store.n_spots, dtype=np.int64)
        np.add.at(demand, store.trip_start[window], 1)

        y, z = _rebalance_heuristic(v_snapshot, demand, config, caps)
        u = apply_inventory_balance(FleetState(v_snapshot), y, z)
        sigma = np.maximum(0, demand - u[:, K_MID] - u[:, K_FULL])
        miduse = np.maximum(0, demand - sigma - u[:, K_FULL])
        zp = np.maximum(z, 0)
        zm = np.maximum(-z, 0)
        decision = DecisionVector(y, zp, zm, u, sigma, miduse)
        cost = rbs_cost(config, decision, DemandScenario(demand))
        recent = float(np.mean(trailing)) if trailing else 0.0
        records.append(OpsRecord(day, v_snapshot, y, z.copy(), u, demand,
                                 sigma, miduse, cost, recent))
        trailing.append(float(demand.sum()))
        if len(trailing) > 7:
            trailing.pop(0)

        v = u.copy()
        for i in rest:
            _apply_trip(v, store.trip_start[i], store.trip_end[i], caps, rng)
        _overnight_normalize(v, fleet_size)
    return records


def _overnight_normalize(v, fleet_size):
    """Depot crews pull surplus bikes overnight (lowest charge first, from
    the fullest spots) so the street fleet stays near its nominal size;
    without this the daily battery vehicle would saturate every dock."""
    excess = int(v.sum()) - fleet_size
    if excess <= 0:
        return
    order = sorted(range(v.shape[0]), key=lambda i: (-v[i].sum(), i))
    for k in (K_LOW, K_MID, K_FULL):
        for i in order:
            if excess <= 0:
                return
            take = min(int(v[i, k]), excess)
            v[i, k] -= take
            excess -= take


# ---------------------------------------------------------------------------
# training table


def decision_feature_names(n_spots):
    names = []
    for i in range(n_spots):
        for k in (K_LOW, K_MID):
            names.append(f"y[{i},{SOC_LEVELS[k]}]")
    for i in range(n_spots):
        for k in range(N_LEVELS):
            names.append(f"z[{i},{SOC_LEVELS[k]}]")
    return names

CONTEXT_FEATURES = ("temp", "humidity", "visibility",
                    "stock_k1", "stock_k2", "stock_k3",
                    "weekday", "recent_demand")


def ebs_feature_space(spots, config: SystemConfig) -> FeatureSpace:
    max_cap = max(s.capacity for s in spots)
    zmax = float(max(config.vehicle_capacity, max_cap))
    total_cap = float(sum(s.capacity for s in spots))
    feats = []
    for name in decision_feature_names(len(spots)):
        if name.startswith("y"):
            feats.append(Feature(name, "decision", 0.0, float(max_cap), integral=True))
        else:
            feats.append(Feature(name, "decision", -zmax, zmax, integral=True))
    ranges = {"temp": (-30.0, 60.0), "humidity": (0.0, 1.0), "visibility": (0.0, 50.0),
              "stock_k1": (0.0, total_cap), "stock_k2": (0.0, total_cap),
              "stock_k3": (0.0, total_cap), "weekday": (0.0, 6.0),
              "recent_demand": (0.0, 100000.0)}
    for name in CONTEXT_FEATURES:
        lo, hi = ranges[name]
        feats.append(Feature(name, "context", lo, hi))
    return FeatureSpace(tuple(feats))


def record_features(record: OpsRecord, store: Store):
    """(decision values, context values) for one ops record."""
    dec = np.concatenate([record.y.ravel(), record.z.ravel()]).astype(float)
    temp, hum, vis = store.weather[record.date]
    ctx = np.array([temp, hum, vis,
                    record.v[:, K_LOW].sum(), record.v[:, K_MID].sum(),
                    record.v[:, K_FULL].sum(),
                    record.date.weekday(), record.recent_demand], dtype=float)
    return dec, ctx


def build_training_set(store: Store, config: SystemConfig,
                       split_fraction=0.8, seed=0):
    """(X_train, y_train, X_test, y_test, feature_space); label is the
    realized operating cost of the day."""
    if not store.ops:
        raise IngestError("no operations records: run the simulation first")
    space = ebs_feature_space(store.spots, config)
    rows, labels = [], []
    for rec in store.ops:
        dec, ctx = record_features(rec, store)
        rows.append(space.assemble(dec, ctx))
        labels.append(rec.cost)
    X = np.array(rows)
    y = np.array(labels)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(X))
    cut = int(round(split_fraction * len(X)))
    tr, te = order[:cut], order[cut:]
    return X[tr], y[tr], X[te], y[te], space


@dataclass
class HistoricalMeans:
    values: dict
    no_data: set

    def get(self, coord, default=0.0):
        return self.values.get(coord, default)


def historical_means(store: Store, coordinates=None) -> HistoricalMeans:
    """Raw (unrounded) per-coordinate means of the swap/move decisions over
    every ops record; rounding happens at pin time."""
    names = decision_feature_names(store.n_spots)
    if coordinates is not None:
        names = list(coordinates)
    if not store.ops:
        return HistoricalMeans({name: 0.0 for name in names}, set(names))
    stacked_y = np.stack([rec.y for rec in store.ops]).mean(axis=0)
    stacked_z = np.stack([rec.z for rec in store.ops]).mean(axis=0)
    values, missing = {}, set()
    for name in names:
        kind = name[0]
        i = int(name[name.index("[") + 1:name.index(",")])
        k = SOC_LEVELS.index(name[name.index(",") + 1:-1])
        if i >= store.n_spots:
            values[name] = 0.0
            missing.add(name)
        elif kind == "y":
            values[name] = float(stacked_y[i, k])
        else:
            values[name] = float(stacked_z[i, k])
    return HistoricalMeans(values, missing)


# ---------------------------------------------------------------------------
# constrained history queries


STORE_FORMAT = "ebsopt-store v1"


def save_store(store: Store, out_dir) -> None:
    """Columnar text persistence with a manifest; rebuildable atomically."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write(STORE_FORMAT + "\n")
        for key, value in sorted(store.manifest().items()):
            fh.write(f"{key} {value}\n")
    with open(os.path.join(out_dir, "spots.csv"), "w", encoding="utf-8") as fh:
        fh.write("id,token,name,lat,lon,dock_count\n")
        for s, tok, name in zip(store.spots, store.station_tokens, store.station_names):
            fh.write(f"{s.id},{tok},{name},{s.latitude!r},{s.longitude!r},{s.capacity}\n")
    with open(os.path.join(out_dir, "trips.csv"), "w", encoding="utf-8") as fh:
        fh.write("start_spot,end_spot,start_time,distance\n")
        for i in range(store.n_trips):
            fh.write(f"{int(store.trip_start[i])},{int(store.trip_end[i])},"
                     f"{store.trip_times[i]:%Y-%m-%d %H:%M:%S},{float(store.trip_distance[i])!r}\n")
    with open(os.path.join(out_dir, "weather.csv"), "w", encoding="utf-8") as fh:
        fh.write("date,temp,humidity,visibility\n")
        for day, (t, h, v) in sorted(store.weather.items()):
            fh.write(f"{day.isoformat()},{t!r},{h!r},{v!r}\n")
    with open(os.path.join(out_dir, "ops.csv"), "w", encoding="utf-8") as fh:
        cols = ("date,spot,v_k1,v_k2,v_k3,y_k1,y_k2,z_k1,z_k2,z_k3,"
                "u_k1,u_k2,u_k3,demand,sigma,miduse,cost,recent_demand")
        fh.write(cols + "\n")
        for rec in store.ops:
            for i in range(store.n_spots):
                fh.write(",".join(map(str, [
                    rec.date.isoformat(), i, *rec.v[i], *rec.y[i], *rec.z[i],
                    *rec.u[i], rec.demand[i], rec.sigma[i], rec.miduse[i],
                    repr(rec.cost), repr(rec.recent_demand)])) + "\n")


def load_store(in_dir) -> Store:
    manifest_path = os.path.join(in_dir, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise IngestError(f"not a store directory: {in_dir}")
    with open(manifest_path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != STORE_FORMAT:
            raise IngestError(f"{manifest_path}: unsupported format {header!r}")
        manifest = dict(line.split() for line in fh if line.strip())

    spots, tokens, names = [], [], []
    fh, reader = _reader(os.path.join(in_dir, "spots.csv"),
                         ("id", "token", "name", "lat", "lon", "dock_count"))
    with fh:
        for row in reader:
            spots.append(Spot(int(row["id"]), int(row["dock_count"]),
                              float(row["lat"]), float(row["lon"])))
            tokens.append(row["token"])
            names.append(row["name"])

    start, end, times, dist = [], [], [], []
    fh, reader = _reader(os.path.join(in_dir, "trips.csv"),
                         ("start_spot", "end_spot", "start_time", "distance"))
    with fh:
        for lineno, row in enumerate(reader, 2):
            start.append(int(row["start_spot"]))
            end.append(int(row["end_spot"]))
            times.append(_parse_time(row["start_time"], "trips.csv", lineno))
            dist.append(float(row["distance"]))

    weather = {}
    fh, reader = _reader(os.path.join(in_dir, "weather.csv"),
                         ("date", "temp", "humidity", "visibility"))
    with fh:
        for lineno, row in enumerate(reader, 2):
            weather[_parse_date(row["date"], "weather.csv", lineno)] = (
                float(row["temp"]), float(row["humidity"]), float(row["visibility"]))

    store = Store(spots, names, tokens, np.array(start, dtype=np.int64),
                  np.array(end, dtype=np.int64), times, np.array(dist),
                  weather, int(manifest.get("trips_quarantined", 0)))

    ops_path = os.path.join(in_dir, "ops.csv")
    if os.path.exists(ops_path):
        n = len(spots)
        by_date = {}
        fh, reader = _reader(ops_path, ("date", "spot", "v_k1", "cost"))
        with fh:
            for lineno, row in enumerate(reader, 2):
                day = _parse_date(row["date"], "ops.csv", lineno)
                by_date.setdefault(day, {})[int(row["spot"])] = row
        for day in sorted(by_date):
            rows = by_date[day]
            v = np.zeros((n, N_LEVELS), dtype=np.int64)
            y = np.zeros((n, 2), dtype=np.int64)
            z = np.zeros((n, N_LEVELS), dtype=np.int64)
            u = np.zeros((n, N_LEVELS), dtype=np.int64)
            demand = np.zeros(n, dtype=np.int64)
            sigma = np.zeros(n, dtype=np.int64)
            miduse = np.zeros(n, dtype=np.int64)
            cost = 0.0
            recent = 0.0
            for i, row in rows.items():
                v[i] = [int(row[f"v_{k}"]) for k in SOC_LEVELS]
                y[i] = [int(row["y_k1"]), int(row["y_k2"])]
                z[i] = [int(row[f"z_{k}"]) for k in SOC_LEVELS]
                u[i] = [int(row[f"u_{k}"]) for k in SOC_LEVELS]
                demand[i] = int(row["demand"])
                sigma[i] = int(row["sigma"])
                miduse[i] = int(row["miduse"])
                cost = float(row["cost"])
                recent = float(row.get("recent_demand", 0.0))
            store.ops.append(OpsRecord(day, v, y, z, u, demand, sigma, miduse,
                                       cost, recent))
    return store


@dataclass(frozen=True)
class HistoryQuery:
    table: str                      # trips | weather | ops
    filters: tuple = ()             # (column, op, value)
    group_by: tuple = ()
    aggregates: tuple = ()          # (fn, column) with fn in count/sum/mean

    def __post_init__(self):
        if self.table not in ("trips", "weather", "ops"):
            raise QueryError(f"unknown table {self.table!r}")
        for fn, _col in self.aggregates:
            if fn not in ("count", "sum", "mean"):
                raise QueryError(f"unknown aggregate {fn!r}")


@dataclass
class Table:
    columns: list
    rows: list

    def column(self, name):
        try:
            j = self.columns.index(name)
        except ValueError:
            raise QueryError(f"unknown column {name!r}") from None
        return [r[j] for r in self.rows]


_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "in": lambda a, b: a in b,
}


def _base_table(store: Store, name: str) -> Table:
    if name == "trips":
        cols = ["start_spot", "end_spot", "date", "hour", "distance"]
        rows = [
            (int(store.trip_start[i]), int(store.trip_end[i]),
             store.trip_times[i].date(), store.trip_times[i].hour,
             float(store.trip_distance[i]))
            for i in range(store.n_trips)
        ]
    elif name == "weather":
        cols = ["date", "temp", "humidity", "visibility"]
        rows = [(d, *vals) for d, vals in sorted(store.weather.items())]
    else:
        cols = ["date", "spot", "v_k1", "v_k2", "v_k3", "y_k1", "y_k2",
                "z_k1", "z_k2", "z_k3", "u_k1", "u_k2", "u_k3",
                "demand", "sigma", "cost"]
        rows = []
        for rec in store.ops:
            for i in range(store.n_spots):
                rows.append((rec.date, i, *map(int, rec.v[i]), int(rec.y[i, 0]),
                             int(rec.y[i, 1]), *map(int, rec.z[i]),
                             *map(int, rec.u[i]), int(rec.demand[i]),
                             int(rec.sigma[i]), float(rec.cost)))
    return Table(cols, rows)


def query(store: Store, q: HistoryQuery) -> Table:
    """Relational-algebra evaluation over the in-memory tables with
    deterministic output ordering."""
    base = _base_table(store, q.table)
    for col, op, value in q.filters:
        if col not in base.columns:
            raise QueryError(f"unknown column {col!r} in table {q.table!r}")
        if op not in _OPS:
            raise QueryError(f"unknown operator {op!r}")
        j = base.columns.index(col)
        base.rows = [r for r in base.rows if _OPS[op](r[j], value)]

    if not q.group_by and not q.aggregates:
        base.rows.sort(key=lambda r: tuple(str(x) for x in r))
        return base

    for col in q.group_by:
        if col not in base.columns:
            raise QueryError(f"unknown column {col!r} in table {q.table!r}")
    key_idx = [base.columns.index(c) for c in q.group_by]
    agg_idx = []
    for fn, col in q.aggregates:
        if fn == "count" and col is None:
            agg_idx.append((fn, None))
            continue
        if col not in base.columns:
            raise QueryError(f"unknown column {col!r} in table {q.table!r}")
        agg_idx.append((fn, base.columns.index(col)))

    groups = {}
    for r in base.rows:
        groups.setdefault(tuple(r[j] for j in key_idx), []).append(r)

    out_cols = list(q.group_by) + [
        (fn if col is None else f"{fn}_{q.aggregates[i][1]}")
        for i, (fn, col) in enumerate(agg_idx)
    ]
    out_rows = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        rows = groups[key]
        aggs = []
        for fn, j in agg_idx:
            if fn == "count":
                aggs.append(len(rows))
            elif fn == "sum":
                aggs.append(sum(r[j] for r in rows))
            else:
                aggs.append(sum(r[j] for r in rows) / len(rows))
        out_rows.append(tuple(key) + tuple(aggs))
    return Table(out_cols, out_rows)
