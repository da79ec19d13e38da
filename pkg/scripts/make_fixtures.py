"""Regenerate the synthetic trip and port fixtures under configs/data/.

The real bike-share, taxi and port datasets are not redistributed; these
fixtures have the same column layout and a comparable demand structure.
Output is deterministic (fixed seed).

    python scripts/make_fixtures.py
"""
import csv
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from mfbo.data import save_distribution

OUT = Path(__file__).resolve().parent.parent / "configs" / "data"
START = datetime(2023, 1, 2)  # a Monday
DAYS = 24 * 7


def bike_trips(rng, path, n_stations=36):
    popularity = rng.dirichlet(np.full(n_stations, 0.8))
    stations = [f"S{i:03d}" for i in range(n_stations)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["StartDate", "StartStation"])
        for day in range(DAYS):
            date = START + timedelta(days=day)
            busy = date.weekday() == 5
            n = rng.poisson(120 if busy else 15)
            # week-to-week drift on top of the base popularity
            p = rng.dirichlet(300 * popularity)
            for s in rng.choice(n_stations, size=n, p=p):
                ts = date + timedelta(seconds=int(rng.integers(6 * 3600, 22 * 3600)))
                w.writerow([ts.strftime("%Y-%m-%d %H:%M:%S"), stations[s]])
        w.writerow(["not-a-date", "S000"])


def taxi_trips(rng, path):
    # a few demand hot spots inside a Manhattan-like box
    centers = np.array([[40.758, -73.985], [40.750, -73.993], [40.764, -73.973], [40.741, -73.989], [40.772, -73.982]])
    weights = np.array([0.35, 0.25, 0.2, 0.12, 0.08])
    spread = np.array([0.006, 0.004, 0.005, 0.004, 0.007])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tpep_pickup_datetime", "pickup_latitude", "pickup_longitude"])
        for day in range(DAYS):
            date = START + timedelta(days=day)
            friday = date.weekday() == 4
            n = rng.poisson(400 if friday else 20)
            k = rng.choice(len(centers), size=n, p=weights)
            pts = centers[k] + rng.normal(size=(n, 2)) * spread[k, None]
            for lat, lon in pts:
                hour = int(rng.integers(15, 18)) if friday and rng.random() < 0.8 else int(rng.integers(0, 24))
                ts = date + timedelta(hours=hour, seconds=int(rng.integers(0, 3600)))
                w.writerow([ts.strftime("%Y-%m-%d %H:%M:%S"), f"{lat:.6f}", f"{lon:.6f}"])


def ports(rng, path, n_ports=30, n_regions=5):
    capacity = rng.gamma(2.0, 1.0, size=n_ports)
    capacity /= capacity.sum()
    region = np.arange(n_ports) % n_regions
    save_distribution(path, capacity, [f"port{i:02d}" for i in range(n_ports)])
    return region


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240501)
    bike_trips(rng, OUT / "bike_trips.csv")
    taxi_trips(rng, OUT / "taxi_trips.csv")
    region = ports(rng, OUT / "port_capacity.csv")
    print("port_region:", region.tolist())


if __name__ == "__main__":
    main()
