"""Trip CSV ingestion and demand-distribution estimation.

Trips are bucketed either by station label or by a lat/lon grid, filtered
to one weekday and an hour window, turned into one normalised histogram per
calendar date, and averaged.  Cells that carry no demand after averaging are
dropped and the result renormalised.
"""
import csv
import io
import math
import warnings
from dataclasses import dataclass
from datetime import datetime

import numpy as np

DISTRIBUTION_HEADER = ("action_id", "label", "prob")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class TripRecord:
    timestamp: datetime
    station: str = None
    lat: float = None
    lon: float = None


@dataclass(frozen=True)
class ColumnMapping:
    timestamp: str = "timestamp"
    station: str = None
    lat: str = None
    lon: str = None
    time_format: str = None  # None: ISO 8601

    def __post_init__(self):
        if self.station is None and (self.lat is None or self.lon is None):
            raise DataError("column mapping needs a station column or both lat and lon")

    def required(self):
        cols = [self.timestamp]
        cols += [self.station] if self.station is not None else [self.lat, self.lon]
        return cols


@dataclass(frozen=True)
class GridSpec:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    rows: int
    cols: int

    def __post_init__(self):
        if not (self.lat_max > self.lat_min and self.lon_max > self.lon_min):
            raise DataError("grid bounds must satisfy max > min on both axes")
        if self.rows < 1 or self.cols < 1:
            raise DataError("grid needs at least one row and one column")

    @property
    def num_cells(self):
        return self.rows * self.cols

    def cell_centers(self):
        """(lat, lon) of every cell centre in row-major order."""
        lat = self.lat_min + (np.arange(self.rows) + 0.5) * (self.lat_max - self.lat_min) / self.rows
        lon = self.lon_min + (np.arange(self.cols) + 0.5) * (self.lon_max - self.lon_min) / self.cols
        return np.stack(np.meshgrid(lat, lon, indexing="ij"), axis=-1).reshape(-1, 2)


@dataclass(frozen=True)
class DemandEstimateConfig:
    weekday: int = 5
    hour_start: int = 0
    hour_end: int = 24
    num_weeks: int = 20

    def __post_init__(self):
        if not 0 <= self.weekday <= 6:
            raise DataError("weekday must be 0 (Monday) .. 6 (Sunday)")
        if not 0 <= self.hour_start < self.hour_end <= 24:
            raise DataError("need 0 <= hour_start < hour_end <= 24")
        if self.num_weeks < 1:
            raise DataError("num_weeks must be at least 1")


@dataclass(frozen=True)
class DemandEstimate:
    demand: np.ndarray
    kept_actions: list
    dates: list
    labels: list


def _parse_time(text, fmt):
    text = text.strip()
    return datetime.strptime(text, fmt) if fmt else datetime.fromisoformat(text)


def parse_trips(stream, mapping):
    """Read trips from a CSV text stream.  Returns ``(records, skipped)``."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise DataError("trip file is empty")
    missing = [c for c in mapping.required() if c not in reader.fieldnames]
    if missing:
        raise DataError(f"trip file lacks mapped column(s): {', '.join(missing)}")
    records, skipped = [], 0
    for row in reader:
        try:
            ts = _parse_time(row[mapping.timestamp], mapping.time_format)
            if mapping.station is not None:
                station = row[mapping.station].strip()
                if not station:
                    raise ValueError("empty station")
                rec = TripRecord(ts, station=station)
            else:
                lat, lon = float(row[mapping.lat]), float(row[mapping.lon])
                if not (math.isfinite(lat) and math.isfinite(lon)):
                    raise ValueError("non-finite coordinate")
                rec = TripRecord(ts, lat=lat, lon=lon)
        except (ValueError, TypeError, AttributeError):
            skipped += 1
            continue
        records.append(rec)
    if not records:
        raise DataError(f"no valid trip rows ({skipped} skipped)")
    return records, skipped


def grid_cell(lat, lon, grid):
    """Row-major cell index, or None outside the box.  Max edges belong to the last row/column."""
    if not (grid.lat_min <= lat <= grid.lat_max and grid.lon_min <= lon <= grid.lon_max):
        return None
    r = int((lat - grid.lat_min) / (grid.lat_max - grid.lat_min) * grid.rows)
    c = int((lon - grid.lon_min) / (grid.lon_max - grid.lon_min) * grid.cols)
    return min(r, grid.rows - 1) * grid.cols + min(c, grid.cols - 1)


def _discretise(trip, discretiser):
    if isinstance(discretiser, GridSpec):
        if trip.lat is None:
            return None
        return grid_cell(trip.lat, trip.lon, discretiser)
    if trip.station is None:
        return None
    return discretiser.get(trip.station)


def station_index(trips):
    """Map every distinct station label to an index, in sorted label order."""
    labels = sorted({t.station for t in trips if t.station is not None})
    return {s: i for i, s in enumerate(labels)}


def estimate_demand(trips, cfg, discretiser):
    """Average of per-date normalised histograms over the latest ``num_weeks`` matching dates.

    ``discretiser`` is a GridSpec or a ``{station_label: index}`` dict.
    """
    if isinstance(discretiser, GridSpec):
        n_cells = discretiser.num_cells
        labels = [str(i) for i in range(n_cells)]
    else:
        n_cells = len(discretiser)
        labels = [None] * n_cells
        for s, i in discretiser.items():
            labels[i] = s

    by_date = {}
    for trip in trips:
        ts = trip.timestamp
        if ts.weekday() != cfg.weekday or not cfg.hour_start <= ts.hour < cfg.hour_end:
            continue
        cell = _discretise(trip, discretiser)
        if cell is None:
            continue
        by_date.setdefault(ts.date(), []).append(cell)
    if not by_date:
        raise DataError("no trips survive the weekday/hour filter")

    dates = sorted(by_date, reverse=True)[: cfg.num_weeks]
    if len(dates) < cfg.num_weeks:
        warnings.warn(f"only {len(dates)} matching dates available, wanted {cfg.num_weeks}", stacklevel=2)
    hists = []
    for d in sorted(dates):
        counts = np.bincount(by_date[d], minlength=n_cells).astype(float)
        hists.append(counts / counts.sum())
    mean = np.mean(hists, axis=0)
    kept = [int(i) for i in np.flatnonzero(mean > 0)]
    demand = mean[kept] / mean[kept].sum()
    return DemandEstimate(demand, kept, sorted(dates), [labels[i] for i in kept])


def save_distribution(path, probs, labels=None):
    probs = np.asarray(probs, dtype=float)
    if labels is None:
        labels = [str(i) for i in range(len(probs))]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISTRIBUTION_HEADER)
        for i, (lab, p) in enumerate(zip(labels, probs)):
            w.writerow([i, lab, format(p, ".17g")])


def load_distribution(path):
    """Read an ``action_id,label,prob`` file.  Returns ``(probs, labels)`` ordered by action_id."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != DISTRIBUTION_HEADER:
            raise DataError(f"{path}: expected header {','.join(DISTRIBUTION_HEADER)}")
        rows = {}
        for line, row in enumerate(reader, start=2):
            try:
                aid = int(row["action_id"])
                p = float(row["prob"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
            if aid in rows:
                raise DataError(f"{path}:{line}: duplicate action_id {aid}")
            if not 0 <= p <= 1:
                raise DataError(f"{path}:{line}: probability {p} outside [0, 1]")
            rows[aid] = ((row["label"] or "").strip() or str(aid), p)
    if not rows:
        raise DataError(f"{path}: no rows")
    ids = sorted(rows)
    probs = np.array([rows[i][1] for i in ids])
    if abs(probs.sum() - 1.0) > 1e-9:
        raise DataError(f"{path}: probabilities sum to {probs.sum()!r}, not 1")
    return probs, [rows[i][0] for i in ids]
