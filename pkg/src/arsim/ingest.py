"""Trip records: parsing, study-window filtering, grid mapping, sampling."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import InputError
from .grid import CellCoord, GridWorld, TripSpec

log = logging.getLogger(__name__)

DEFAULT_COLUMNS = {
    "pickup_lon_col": "pickup_longitude",
    "pickup_lat_col": "pickup_latitude",
    "dropoff_lon_col": "dropoff_longitude",
    "dropoff_lat_col": "dropoff_latitude",
    "pickup_time_col": "tpep_pickup_datetime",
}

TIME_FORMATS = ("%Y-%m-%d %H:%M:%S", "%m/%d/%Y %I:%M:%S %p", "%Y-%m-%dT%H:%M:%S")

# Lower Manhattan corridor, (lon, lat) counter-clockwise.
DEFAULT_QUAD = (
    (-74.0200, 40.7000),
    (-73.9700, 40.7100),
    (-73.9550, 40.7650),
    (-74.0100, 40.7550),
)


@dataclass(frozen=True)
class RawTrip:
    pickup_lon: float
    pickup_lat: float
    dropoff_lon: float
    dropoff_lat: float
    pickup_time: datetime


@dataclass(frozen=True)
class StudyWindow:
    quadrilateral: tuple
    start: datetime
    end: datetime

    def __post_init__(self):
        if len(self.quadrilateral) != 4:
            raise InputError("study region needs exactly 4 vertices")
        if not self.start < self.end:
            raise InputError("window start must precede end")
        if _self_intersecting(self.quadrilateral):
            raise InputError("study quadrilateral is self-intersecting")

    @property
    def bbox(self):
        lons = [p[0] for p in self.quadrilateral]
        lats = [p[1] for p in self.quadrilateral]
        return min(lons), min(lats), max(lons), max(lats)


def default_window():
    return StudyWindow(DEFAULT_QUAD, datetime(2016, 1, 2, 9, 0, 0), datetime(2016, 1, 2, 10, 0, 0))


def _orient(a, b, c):
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)


def _segments_cross(p1, p2, q1, q2):
    return _orient(p1, p2, q1) * _orient(p1, p2, q2) < 0 and _orient(q1, q2, p1) * _orient(q1, q2, p2) < 0


def _self_intersecting(quad):
    a, b, c, d = quad
    return _segments_cross(a, b, c, d) or _segments_cross(b, c, d, a)


def _on_segment(p, a, b, eps=1e-12):
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > eps:
        return False
    return min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps


def point_in_polygon(pt, poly):
    """Ray casting; points on an edge or vertex count as inside."""
    n = len(poly)
    for k in range(n):
        if _on_segment(pt, poly[k], poly[(k + 1) % n]):
            return True
    x, y = pt
    inside = False
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xin:
                inside = not inside
    return inside


def _parse_time(text):
    text = text.strip()
    for fmt in TIME_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise ValueError(f"unparseable timestamp {text!r}")


def parse_trip_records(path, columns=None):
    """Read a TLC-style CSV. Returns ``(trips, n_skipped)``."""
    cols = dict(DEFAULT_COLUMNS)
    cols.update(columns or {})
    path = Path(path)
    if not path.exists():
        raise InputError(f"trip file not found: {path}")
    trips, skipped = [], 0
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for key, name in cols.items():
            if name not in header:
                raise InputError(f"missing column {name!r} (config key {key})")
        for row in reader:
            try:
                vals = [float(row[cols[k]]) for k in ("pickup_lon_col", "pickup_lat_col", "dropoff_lon_col", "dropoff_lat_col")]
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError("non-finite coordinate")
                trips.append(RawTrip(*vals, _parse_time(row[cols["pickup_time_col"]])))
            except (TypeError, ValueError):
                skipped += 1
    if skipped:
        log.info("skipped %d malformed rows in %s", skipped, path)
    return trips, skipped


def filter_window(trips, w: StudyWindow):
    """Trips starting in ``[start, end)`` with both ends inside the region."""
    q = w.quadrilateral
    return [
        t
        for t in trips
        if w.start <= t.pickup_time < w.end
        and point_in_polygon((t.pickup_lon, t.pickup_lat), q)
        and point_in_polygon((t.dropoff_lon, t.dropoff_lat), q)
    ]


def lonlat_to_cell(lon, lat, w: StudyWindow, g: GridWorld):
    x0, y0, x1, y1 = w.bbox
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise InputError("study window has zero area")
    fx = (lon - x0) / (x1 - x0)
    fy = (lat - y0) / (y1 - y0)
    cx = int(round(fx * (g.width - 1)))
    cy = int(round(fy * (g.height - 1)))
    return CellCoord(min(max(cx, 0), g.width - 1), min(max(cy, 0), g.height - 1))


def map_to_grid(trip: RawTrip, w: StudyWindow, g: GridWorld):
    """Nearest-cell mapping over the region's bounding box.

    Returns ``None`` when both ends land in the same cell.
    """
    o = lonlat_to_cell(trip.pickup_lon, trip.pickup_lat, w, g)
    d = lonlat_to_cell(trip.dropoff_lon, trip.dropoff_lat, w, g)
    if o == d:
        return None
    return TripSpec(o, d)


def stratified_sample(trips, n, bins, rng, g: GridWorld = None):
    """Draw ``n`` trips spread evenly over equal-width distance bins.

    Takes ``ceil(n / bins)`` from every occupied bin (with replacement when
    a bin is short), shuffles, and truncates to ``n``.
    """
    if n <= 0:
        return []
    if not trips:
        raise InputError("cannot sample from an empty trip list")
    if bins < 1:
        raise InputError("bins must be >= 1")
    if g is None:
        lengths = np.array([abs(t.origin.x - t.destination.x) + abs(t.origin.y - t.destination.y) for t in trips], float)
    else:
        lengths = np.array([g.distance(t.origin, t.destination) for t in trips])
    lo, hi = lengths.min(), lengths.max()
    if hi - lo <= 0:
        which = np.zeros(len(trips), dtype=int)
    else:
        which = np.minimum(((lengths - lo) / (hi - lo) * bins).astype(int), bins - 1)
    per_bin = -(-n // bins)
    picked = []
    for b in range(bins):
        members = np.flatnonzero(which == b)
        if members.size == 0:
            continue
        replace = members.size < per_bin
        picked.extend(rng.choice(members, size=per_bin, replace=replace).tolist())
    picked = [picked[k] for k in rng.permutation(len(picked))][:n]
    return [trips[k] for k in picked]


def synthetic_trips(g: GridWorld, n, rng):
    """Uniform random in-bounds trips with distinct endpoints."""
    out = []
    while len(out) < n:
        o = CellCoord(int(rng.integers(g.width)), int(rng.integers(g.height)))
        d = CellCoord(int(rng.integers(g.width)), int(rng.integers(g.height)))
        if o != d:
            out.append(TripSpec(o, d))
    return out


def save_trips(trips, path):
    with Path(path).open("w") as fh:
        fh.write("# ox oy dx dy\n")
        for t in trips:
            fh.write(f"{t.origin.x} {t.origin.y} {t.destination.x} {t.destination.y}\n")


def load_trips(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"trip file not found: {path}")
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        ox, oy, dx, dy = map(int, line.split())
        out.append(TripSpec(CellCoord(ox, oy), CellCoord(dx, dy)))
    return out


def ingest_file(path, window: StudyWindow, g: GridWorld, columns=None):
    """Parse, filter and grid-map a trip file. Returns ``(trips, stats)``."""
    raw, skipped = parse_trip_records(path, columns)
    kept = filter_window(raw, window)
    mapped = [map_to_grid(t, window, g) for t in kept]
    trips = [t for t in mapped if t is not None]
    stats = {"rows": len(raw) + skipped, "skipped": skipped, "in_window": len(kept), "same_cell": len(kept) - len(trips)}
    return trips, stats
