"""Grid world: cells, distances, routes and detours.

Cells are addressed by ``CellCoord(x, y)`` and flattened row-major as
``y * width + x``. Distances come from a dense matrix in kilometres; the
default matrix is the Manhattan metric scaled by ``cell_km``.

A driver's route visits its pending pickups in sequence order, then every
dropoff in the cheapest order, then the driver's own destination.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import FeasibilityError, InputError

AVERAGE_SPEED_KMH = 25.0
TOLERANCE_MULT = 1.5


class CellCoord(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class TripSpec:
    origin: CellCoord
    destination: CellCoord

    def __post_init__(self):
        object.__setattr__(self, "origin", CellCoord(*map(int, self.origin)))
        object.__setattr__(self, "destination", CellCoord(*map(int, self.destination)))
        if self.origin == self.destination:
            raise InputError(f"zero-length trip at {self.origin}")


class GridWorld:
    """A ``width x height`` lattice with a pairwise distance matrix (km).

    Instances are treated as immutable once built.
    """

    def __init__(self, width=15, height=15, cell_km=0.28, dist=None):
        if width < 1 or height < 1:
            raise InputError("grid dimensions must be positive")
        if not cell_km > 0:
            raise InputError("cell_km must be positive")
        self.width = int(width)
        self.height = int(height)
        self.cell_km = float(cell_km)
        n = self.width * self.height
        if dist is None:
            xs = np.arange(n) % self.width
            ys = np.arange(n) // self.width
            dist = (np.abs(xs[:, None] - xs[None, :]) + np.abs(ys[:, None] - ys[None, :])) * self.cell_km
            self.synthetic = True
        else:
            dist = np.asarray(dist, dtype=float)
            self.synthetic = False
        if dist.shape != (n, n):
            raise InputError(f"distance matrix must be {n}x{n}, got {dist.shape}")
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise InputError("distance matrix must be finite and nonnegative")
        if not np.allclose(dist, dist.T, atol=1e-12):
            raise InputError("distance matrix must be symmetric")
        if np.any(np.diag(dist) != 0):
            raise InputError("distance matrix diagonal must be zero")
        self.dist = dist
        self.dist.setflags(write=False)
        # nested lists are much faster than ndarray for scalar lookups
        self._d = dist.tolist()
        self.max_detour = float(dist.max()) if n > 1 else 0.0
        self._order_cache: dict = {}

    @classmethod
    def from_file(cls, path):
        """Read the ``width height cell_km`` + row-major matrix text format."""
        path = Path(path)
        if not path.exists():
            raise InputError(f"distance matrix file not found: {path}")
        with path.open() as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise InputError("header must be 'width height cell_km'")
            width, height, cell_km = int(header[0]), int(header[1]), float(header[2])
            values = np.array(fh.read().split(), dtype=float)
        n = width * height
        if values.size != n * n:
            raise InputError(f"expected {n * n} distances, found {values.size}")
        return cls(width, height, cell_km, values.reshape(n, n))

    def to_file(self, path):
        with Path(path).open("w") as fh:
            fh.write(f"{self.width} {self.height} {self.cell_km!r}\n")
            for row in self.dist:
                fh.write(" ".join(repr(float(v)) for v in row))
                fh.write("\n")

    @property
    def n_cells(self):
        return self.width * self.height

    @property
    def diameter_cells(self):
        return self.width + self.height - 2

    @property
    def tick_minutes(self):
        """Simulated minutes to cross one cell at the average speed."""
        return self.cell_km / AVERAGE_SPEED_KMH * 60.0

    def in_bounds(self, c):
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def index(self, c):
        if not self.in_bounds(c):
            raise InputError(f"cell {tuple(c)} outside {self.width}x{self.height} grid")
        return int(c[1]) * self.width + int(c[0])

    def coord(self, idx):
        return CellCoord(idx % self.width, idx // self.width)

    def distance(self, a, b):
        return self._d[self.index(a)][self.index(b)]

    def all_cells(self):
        return [CellCoord(x, y) for y in range(self.height) for x in range(self.width)]

    # -- route planning on flattened indices -------------------------------

    def best_drop_order(self, start, drops, end):
        """Cheapest visiting order of ``drops`` from ``start`` ending at ``end``.

        Returns ``(length, order)`` where ``order`` indexes into ``drops``.
        Ties resolve to the first permutation in lexicographic index order.
        """
        key = (start, tuple(drops), end)
        hit = self._order_cache.get(key)
        if hit is not None:
            return hit
        d = self._d
        if not drops:
            res = (d[start][end], ())
        elif len(drops) == 1:
            res = (d[start][drops[0]] + d[drops[0]][end], (0,))
        else:
            best, best_perm = None, None
            for perm in itertools.permutations(range(len(drops))):
                cur, total = start, 0.0
                for k in perm:
                    total += d[cur][drops[k]]
                    cur = drops[k]
                total += d[cur][end]
                if best is None or total < best - 1e-12:
                    best, best_perm = total, perm
            res = (best, best_perm)
        if len(self._order_cache) > 200_000:
            self._order_cache.clear()
        self._order_cache[key] = res
        return res

    def plan(self, start, pickups, onboard, end):
        """Plan the remaining route from flat cell ``start``.

        ``pickups`` is an ordered list of ``(rider_id, origin_idx, dest_idx)``
        still to be collected; ``onboard`` lists ``(rider_id, dest_idx)`` for
        riders already in the vehicle. Returns ``(length_km, waypoints)`` with
        waypoints ``(cell_idx, kind, rider_id)``; the final waypoint is the
        driver's own destination with rider ``None``.
        """
        d = self._d
        length = 0.0
        cur = start
        waypoints = []
        for rid, o, _ in pickups:
            length += d[cur][o]
            cur = o
            waypoints.append((o, "pickup", rid))
        drops = [(rid, dest) for rid, dest in onboard] + [(rid, dest) for rid, _, dest in pickups]
        tail, order = self.best_drop_order(cur, [dest for _, dest in drops], end)
        length += tail
        for k in order:
            waypoints.append((drops[k][1], "dropoff", drops[k][0]))
        waypoints.append((end, "arrive", None))
        return length, waypoints


EMPTY = ()


@dataclass(frozen=True)
class PickupSequence:
    """Ordered riders a driver collects in one day (``phi``)."""

    entries: tuple = EMPTY

    def __post_init__(self):
        ids = [rid for rid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate rider in pickup sequence")

    @classmethod
    def of(cls, items: Iterable):
        if isinstance(items, Mapping):
            items = items.items()
        return cls(tuple((rid, trip) for rid, trip in items))

    @property
    def ids(self):
        return tuple(rid for rid, _ in self.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, rid):
        return any(r == rid for r, _ in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, rid, trip):
        return PickupSequence(self.entries + ((rid, trip),))


def cell_distance(g: GridWorld, a, b) -> float:
    return g.distance(a, b)


def route_length(g: GridWorld, driver: TripSpec, seq: PickupSequence) -> float:
    """Length of ``d_i(phi)`` for a driver starting at its origin."""
    pickups = [(rid, g.index(t.origin), g.index(t.destination)) for rid, t in seq]
    length, _ = g.plan(g.index(driver.origin), pickups, (), g.index(driver.destination))
    return length


def detour(g: GridWorld, driver: TripSpec, seq: PickupSequence, rider_id, rider: TripSpec, capacity=None) -> float:
    """Extra route length from appending ``rider`` to ``seq``."""
    if rider_id in seq:
        raise InputError(f"rider {rider_id} already in sequence")
    if capacity is not None and len(seq) >= capacity:
        raise FeasibilityError(f"capacity {capacity} already used")
    return route_length(g, driver, seq.append(rider_id, rider)) - route_length(g, driver, seq)


@dataclass
class RouteState:
    """A driver's in-flight progress through its day.

    At day start (``driven_km == 0`` and position at the origin) the totals
    reported here coincide with :func:`route_length`.
    """

    trip: TripSpec
    pos: CellCoord = None
    driven_km: float = 0.0
    seq: PickupSequence = field(default_factory=PickupSequence)
    picked: set = field(default_factory=set)
    dropped: set = field(default_factory=set)

    def __post_init__(self):
        if self.pos is None:
            self.pos = self.trip.origin

    def _pending(self, g, seq):
        pickups, onboard = [], []
        for rid, t in seq:
            if rid not in self.picked:
                pickups.append((rid, g.index(t.origin), g.index(t.destination)))
            elif rid not in self.dropped:
                onboard.append((rid, g.index(t.destination)))
        return pickups, onboard

    def remaining(self, g: GridWorld, seq=None):
        seq = self.seq if seq is None else seq
        pickups, onboard = self._pending(g, seq)
        return g.plan(g.index(self.pos), pickups, onboard, g.index(self.trip.destination))

    def total_km(self, g: GridWorld):
        return self.driven_km + self.remaining(g)[0]

    def total_with(self, g: GridWorld, rider_id, trip: TripSpec):
        return self.driven_km + self.remaining(g, self.seq.append(rider_id, trip))[0]


def feasible_riders(
    g: GridWorld,
    state: RouteState,
    riders: Mapping,
    radius: float,
    capacity: int,
    tolerance_mult: float = TOLERANCE_MULT,
) -> set:
    """Ids of riders a driver may still take on.

    A rider qualifies when its origin lies within ``radius`` km of the
    driver's current cell, the driver has unused capacity, and the whole-day
    route including the rider stays within ``tolerance_mult`` times the solo
    trip.
    """
    if radius < 0:
        raise InputError("radius must be nonnegative")
    if len(state.seq) >= capacity:
        return set()
    limit = tolerance_mult * g.distance(state.trip.origin, state.trip.destination) + 1e-9
    pos = g.index(state.pos)
    d = g._d
    out = set()
    for rid, trip in riders.items():
        if rid in state.seq:
            continue
        if d[pos][g.index(trip.origin)] > radius + 1e-9:
            continue
        if state.total_with(g, rid, trip) <= limit:
            out.add(rid)
    return out


def step_toward(g: GridWorld, pos, target) -> CellCoord:
    """One cell along the x-then-y shortest Manhattan path."""
    g.index(pos)
    g.index(target)
    x, y = pos
    if x != target[0]:
        x += 1 if target[0] > x else -1
    elif y != target[1]:
        y += 1 if target[1] > y else -1
    return CellCoord(x, y)


def manhattan_cells(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def trips_direct_km(g: GridWorld, trips: Sequence[TripSpec]) -> np.ndarray:
    return np.array([g.distance(t.origin, t.destination) for t in trips])
