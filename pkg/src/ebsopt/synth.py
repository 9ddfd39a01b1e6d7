"""Synthetic trip/weather/station fixtures.

Generates CSV files in the documented ingest schemas with plausible
structure: stations on a jittered grid, gravity-weighted origin-destination
flows with a few deliberately hot pairs, noon-heavy departure times, and
smooth seasonal weather. Everything is seeded.
"""

from __future__ import annotations

import os
from datetime import date, datetime, timedelta

import numpy as np


def generate_dataset(out_dir, n_spots=12, n_days=120, seed=0,
                     start=date(2015, 3, 1), trips_per_day=40.0,
                     capacity_range=(8, 14)):
    """Write stations.csv / weather.csv / trips.csv under ``out_dir``.

    Returns the three paths. Station ids are S00, S01, ...; hot OD pairs
    link consecutive stations so relevance ranking has signal to find.
    """
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    stations_path = os.path.join(out_dir, "stations.csv")
    weather_path = os.path.join(out_dir, "weather.csv")
    trips_path = os.path.join(out_dir, "trips.csv")

    side = int(np.ceil(np.sqrt(n_spots)))
    caps = rng.integers(capacity_range[0], capacity_range[1] + 1, n_spots)
    with open(stations_path, "w", encoding="utf-8") as fh:
        fh.write("id,name,lat,lon,dock_count\n")
        for i in range(n_spots):
            lat = 47.60 + 0.01 * (i // side) + 0.002 * rng.random()
            lon = -122.33 + 0.01 * (i % side) + 0.002 * rng.random()
            fh.write(f"S{i:02d},Station {i},{lat:.5f},{lon:.5f},{caps[i]}\n")

    days = [start + timedelta(days=d) for d in range(n_days)]
    with open(weather_path, "w", encoding="utf-8") as fh:
        fh.write("date,temp,humidity,visibility\n")
        for d, day in enumerate(days):
            season = np.sin(2 * np.pi * (d / 365.0))
            temp = 12.0 + 9.0 * season + rng.normal(0, 2.0)
            hum = float(np.clip(0.6 - 0.2 * season + rng.normal(0, 0.08), 0.05, 0.99))
            vis = float(np.clip(14.0 + 3.0 * season + rng.normal(0, 1.5), 2.0, 25.0))
            fh.write(f"{day.isoformat()},{temp:.1f},{hum:.3f},{vis:.1f}\n")

    # gravity weights plus hot corridors between neighbor ids
    popularity = 0.5 + rng.random(n_spots)
    od = np.outer(popularity, popularity)
    np.fill_diagonal(od, 0.2 * od.diagonal())
    for i in range(0, n_spots - 1, 2):
        od[i, i + 1] *= 6.0
        od[i + 1, i] *= 6.0
    od = od / od.sum()
    flat = od.ravel()

    trip_id = 0
    with open(trips_path, "w", encoding="utf-8") as fh:
        fh.write("trip_id,start_station,end_station,start_time,stop_time,distance\n")
        for d, day in enumerate(days):
            weather_pull = 1.0 + 0.3 * np.sin(2 * np.pi * (d / 365.0))
            n_trips = rng.poisson(trips_per_day * weather_pull)
            pair_idx = rng.choice(len(flat), size=n_trips, p=flat)
            for p in pair_idx:
                a, b = divmod(int(p), n_spots)
                # departures cluster around midday
                hour = int(np.clip(rng.normal(12.3, 2.6), 6, 21))
                minute = int(rng.integers(0, 60))
                t0 = datetime(day.year, day.month, day.day, hour, minute)
                dur = max(3, int(rng.normal(16, 6)))
                t1 = t0 + timedelta(minutes=dur)
                dist = max(200, int(rng.normal(1800, 700)))
                fh.write(f"T{trip_id:07d},S{a:02d},S{b:02d},"
                         f"{t0:%Y-%m-%d %H:%M},{t1:%Y-%m-%d %H:%M},{dist}\n")
                trip_id += 1
    return stations_path, weather_path, trips_path
