"""Tick-level execution of one simulated day.

Every tick: matcher decisions are applied, occupancy is recorded, then each
driver still on the road moves one cell toward its next waypoint. A driver
is done once it reaches its own destination with all riders delivered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .economy import EconomyParams, ScoreLedger
from .errors import ContractViolation
from .grid import AVERAGE_SPEED_KMH, TOLERANCE_MULT, GridWorld, RouteState, feasible_riders, step_toward


@dataclass
class DayConfig:
    capacity: int = 4
    pickup_radius_cells: float = 3.0
    tolerance_mult: float = TOLERANCE_MULT
    economy: EconomyParams = field(default_factory=EconomyParams)
    alpha_r: float = 0.5
    theta_frac: float = 0.15
    normalize_reward: bool = True
    tick_cap_mult: int = 4
    unserved_solo: bool = True


@dataclass
class DayLog:
    """Everything the metrics need about one simulated day."""

    day: int
    roles: dict
    direct_km: dict
    vehicle_km: dict
    time_min: dict
    served: dict
    driver_route_km: dict
    driver_riders: dict
    util_series: list
    density: np.ndarray
    solo_density: np.ndarray
    horizon_ticks: int
    traffic_km: dict
    scores: dict
    matches: list = field(default_factory=list)
    births: list = field(default_factory=list)
    dropouts: list = field(default_factory=list)
    returns: list = field(default_factory=list)
    anomalies: list = field(default_factory=list)
    total_reward: float = 0.0

    @property
    def n_drivers(self):
        return sum(1 for r in self.roles.values() if r == "driver")

    @property
    def n_riders(self):
        return sum(1 for r in self.roles.values() if r == "rider")

    def to_dict(self):
        out = dict(self.__dict__)
        out["density"] = self.density.tolist()
        out["solo_density"] = self.solo_density.tolist()
        for key in ("roles", "direct_km", "vehicle_km", "time_min", "served", "driver_route_km", "driver_riders", "traffic_km", "scores"):
            out[key] = {str(k): v for k, v in out[key].items()}
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["density"] = np.array(data["density"], dtype=float)
        data["solo_density"] = np.array(data["solo_density"], dtype=float)
        for key in ("roles", "direct_km", "vehicle_km", "time_min", "served", "driver_route_km", "driver_riders", "traffic_km", "scores"):
            data[key] = {int(k): v for k, v in data[key].items()}
        data["matches"] = [tuple(m) for m in data["matches"]]
        data["returns"] = [tuple(r) for r in data["returns"]]
        return cls(**data)


def solo_path(g: GridWorld, origin, destination):
    """Cells occupied tick by tick by a vehicle driving alone (excluding arrival)."""
    cells = []
    pos = origin
    while pos != destination:
        cells.append(pos)
        pos = step_toward(g, pos, destination)
    return cells


class DayEnv:
    """Mutable state of one day's ride-sharing."""

    def __init__(self, grid: GridWorld, drivers, riders, scores, cfg: DayConfig = None, capacities=None):
        self.g = grid
        self.cfg = cfg or DayConfig()
        self.drivers = dict(drivers)
        self.riders = dict(riders)
        self.scores = dict(scores)
        self.driver_ids = sorted(self.drivers)
        self.rider_ids = sorted(self.riders)
        self.capacities = capacities or {}
        self.states = {d: RouteState(self.drivers[d]) for d in self.driver_ids}
        self.plans = {d: self.states[d].remaining(grid)[1] for d in self.driver_ids}
        self.direct = {aid: grid.distance(t.origin, t.destination) for aid, t in list(self.drivers.items()) + list(self.riders.items())}
        self.waiting = set(self.rider_ids)
        self.slot_of = {r: k for k, r in enumerate(self.rider_ids)}
        self.claimed_by = {}
        self.finished = set()
        self.tick = 0
        self.tick_cap = self.cfg.tick_cap_mult * grid.diameter_cells
        self.pick_tick, self.drop_tick, self.arrive_tick = {}, {}, {}
        self.ledger = ScoreLedger()
        self.matches = []
        self.anomalies = []
        self.density = np.zeros((grid.height, grid.width))
        self.util_series = []
        self.traffic_km = {aid: 0.0 for aid in self.driver_ids}
        self.waiting_grid = np.zeros((grid.height, grid.width))
        for r in self.rider_ids:
            o = self.riders[r].origin
            self.waiting_grid[o.y, o.x] += 1
        self.radius_km = self.cfg.pickup_radius_cells * grid.cell_km
        self.total_reward = 0.0
        for d in self.driver_ids:
            self._process_events(d)

    # -- queries -------------------------------------------------------------

    def capacity(self, d):
        return self.capacities.get(d, self.cfg.capacity)

    @property
    def done(self):
        return len(self.finished) == len(self.driver_ids)

    def can_decide(self, d):
        return d not in self.finished and len(self.states[d].seq) < self.capacity(d)

    def feasible(self, d):
        if not self.can_decide(d):
            return set()
        avail = {r: self.riders[r] for r in self.waiting}
        return feasible_riders(self.g, self.states[d], avail, self.radius_km, self.capacity(d), self.cfg.tolerance_mult)

    def marginal_detour(self, d, r):
        st = self.states[d]
        return st.total_with(self.g, r, self.riders[r]) - st.total_km(self.g)

    def reward(self, d, r):
        from .marl.maddpg import pick_reward

        return pick_reward(self, d, r)

    # -- transitions -----------------------------------------------------------

    def assign(self, d, r, enforce_radius=True):
        """Commit rider ``r`` to driver ``d``; returns the pick reward."""
        if r not in self.waiting:
            raise ContractViolation(f"rider {r} is not waiting")
        if not self.can_decide(d):
            raise ContractViolation(f"driver {d} cannot take riders")
        st = self.states[d]
        before = st.total_km(self.g)
        after = st.total_with(self.g, r, self.riders[r])
        limit = self.cfg.tolerance_mult * self.direct[d] + 1e-9
        if after > limit:
            raise ContractViolation(f"rider {r} breaks driver {d}'s detour tolerance")
        if enforce_radius and self.g.distance(st.pos, self.riders[r].origin) > self.radius_km + 1e-9:
            raise ContractViolation(f"rider {r} outside pickup radius of driver {d}")
        rew = self.reward(d, r)
        detour_km = max(after - before, 0.0)
        gain = self.ledger.record_match(d, r, self.scores[r], detour_km, self.g.max_detour, self.cfg.economy)
        st.seq = st.seq.append(r, self.riders[r])
        self.waiting.discard(r)
        self.claimed_by[r] = d
        o = self.riders[r].origin
        self.waiting_grid[o.y, o.x] -= 1
        self.matches.append((d, r, gain, detour_km))
        self.plans[d] = st.remaining(self.g)[1]
        self._process_events(d)
        self.total_reward += rew
        return rew

    def _process_events(self, d):
        st = self.states[d]
        plan = self.plans[d]
        here = self.g.index(st.pos)
        while plan and plan[0][0] == here:
            _, kind, rid = plan.pop(0)
            if kind == "pickup":
                st.picked.add(rid)
                self.pick_tick[rid] = self.tick
            elif kind == "dropoff":
                st.dropped.add(rid)
                self.drop_tick[rid] = self.tick
            else:
                self.finished.add(d)
                self.arrive_tick[d] = self.tick

    def advance(self):
        """Record occupancy for this tick and move every active driver one cell."""
        on_road = [d for d in self.driver_ids if d not in self.finished]
        if on_road:
            onboard = 0
            for d in on_road:
                st = self.states[d]
                self.density[st.pos.y, st.pos.x] += 1
                onboard += len(st.picked) - len(st.dropped)
            self.util_series.append((len(on_road) + onboard) / len(on_road))
        for d in on_road:
            st = self.states[d]
            target = self.g.coord(self.plans[d][0][0])
            new = step_toward(self.g, st.pos, target)
            km = self.g.distance(st.pos, new)
            st.driven_km += km
            riders_in = [r for r in st.picked if r not in st.dropped]
            share = km / (1 + len(riders_in))
            self.traffic_km[d] += share
            for r in riders_in:
                self.traffic_km[r] = self.traffic_km.get(r, 0.0) + share
            st.pos = new
        self.tick += 1
        for d in on_road:
            self._process_events(d)
        if not self.done and self.tick >= self.tick_cap:
            self._force_finish()

    def _force_finish(self):
        for d in self.driver_ids:
            if d in self.finished:
                continue
            st = self.states[d]
            for r in [r for r, _ in st.seq if r not in st.picked]:
                # abandoned pickups fall back to solo travel
                st.seq = type(st.seq)(tuple(e for e in st.seq.entries if e[0] != r))
                self.claimed_by.pop(r, None)
                self.matches = [m for m in self.matches if m[1] != r]
            length, _ = st.remaining(self.g)
            st.driven_km += length
            for r in st.picked - st.dropped:
                st.dropped.add(r)
                self.drop_tick[r] = self.tick
            self.finished.add(d)
            self.arrive_tick[d] = self.tick
            self.anomalies.append(f"tick cap {self.tick_cap} reached; driver {d} forced to destination")

    def check_constraints(self):
        for d in self.driver_ids:
            st = self.states[d]
            if len(st.seq) > self.capacity(d):
                raise ContractViolation(f"driver {d} exceeded capacity")
            if st.driven_km > self.cfg.tolerance_mult * self.direct[d] + 1e-6:
                raise ContractViolation(f"driver {d} drove {st.driven_km:.3f} km > tolerance of {self.direct[d]:.3f} km")

    # -- output ----------------------------------------------------------------

    def day_log(self, day):
        g = self.g
        tick_min = g.tick_minutes
        roles = {d: "driver" for d in self.driver_ids}
        roles.update({r: "rider" for r in self.rider_ids})
        vehicle_km, time_min, served = {}, {}, {}
        solo = np.zeros_like(self.density)
        density = self.density.copy()
        traffic = dict(self.traffic_km)
        for aid in self.driver_ids + self.rider_ids:
            trip = self.drivers.get(aid) or self.riders[aid]
            for c in solo_path(g, trip.origin, trip.destination):
                solo[c.y, c.x] += 1
        for d in self.driver_ids:
            vehicle_km[d] = self.states[d].driven_km
            time_min[d] = self.arrive_tick[d] * tick_min
        for r in self.rider_ids:
            ok = r in self.drop_tick and r in self.claimed_by
            served[r] = ok
            if ok:
                vehicle_km[r] = 0.0
                time_min[r] = self.drop_tick[r] * tick_min
            else:
                km = self.direct[r]
                time_min[r] = km / AVERAGE_SPEED_KMH * 60.0
                if self.cfg.unserved_solo:
                    vehicle_km[r] = km
                    traffic[r] = km
                    for c in solo_path(g, self.riders[r].origin, self.riders[r].destination):
                        density[c.y, c.x] += 1
                else:
                    vehicle_km[r] = 0.0
                    traffic[r] = 0.0
        return DayLog(
            day=day,
            roles=roles,
            direct_km=dict(self.direct),
            vehicle_km=vehicle_km,
            time_min=time_min,
            served=served,
            driver_route_km={d: self.states[d].driven_km for d in self.driver_ids},
            driver_riders={d: len(self.states[d].seq) for d in self.driver_ids},
            util_series=list(self.util_series),
            density=density,
            solo_density=solo,
            horizon_ticks=self.tick_cap,
            traffic_km=traffic,
            scores=dict(self.scores),
            matches=list(self.matches),
            anomalies=list(self.anomalies),
            total_reward=self.total_reward,
        )
