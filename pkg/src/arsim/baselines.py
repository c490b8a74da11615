"""Day-level assignment baselines: PSO, no-sharing, and an exact oracle.

A particle holds one real gene per rider (riders in sorted-id order). A gene
below zero means "unassigned"; otherwise ``floor(gene)`` indexes the sorted
driver list. Within a driver, pickups are ordered by cheapest insertion.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .economy import EconomyParams, driver_gain
from .errors import ContractViolation, InputError
from .grid import AVERAGE_SPEED_KMH, TOLERANCE_MULT, GridWorld, TripSpec


@dataclass(frozen=True)
class PsoParams:
    swarm_size: int = 40
    iterations: int = 100
    inertia: float = 0.72
    c1: float = 1.49
    c2: float = 1.49
    beta_pso: float = 1.0
    alpha_r: float = 0.5
    perturb_prob: float = 0.3

    def __post_init__(self):
        if self.swarm_size < 1:
            raise InputError("pso.swarm_size must be >= 1")
        if min(self.inertia, self.c1, self.c2) < 0:
            raise InputError("pso coefficients must be nonnegative")


@dataclass
class DayState:
    """Static snapshot of one day's matching problem."""

    grid: GridWorld
    drivers: dict
    riders: dict
    scores: dict
    capacity: object = 4
    economy: EconomyParams = field(default_factory=EconomyParams)
    tolerance_mult: float = TOLERANCE_MULT

    def __post_init__(self):
        self.driver_ids = sorted(self.drivers)
        self.rider_ids = sorted(self.riders)
        g = self.grid
        self._idx = {}
        for aid, t in list(self.drivers.items()) + list(self.riders.items()):
            self._idx[aid] = (g.index(t.origin), g.index(t.destination))
        self._plans = {}
        self._stats = {}
        self._contrib = {}
        self._repairs = {}

    def cap(self, driver_id):
        if isinstance(self.capacity, dict):
            return self.capacity[driver_id]
        return int(self.capacity)

    def direct(self, aid):
        o, d = self._idx[aid]
        return self.grid._d[o][d]

    def route_for(self, driver_id, order):
        """Route length for pickups in ``order`` (tuple of rider ids)."""
        o, d = self._idx[driver_id]
        pickups = [(r,) + self._idx[r] for r in order]
        return self.grid.plan(o, pickups, (), d)[0]

    def plan(self, driver_id, riders):
        """Cheapest-insertion pickup order for a rider set.

        Returns ``(order, route_km, incremental_detours)``; cached per set.
        """
        key = (driver_id, tuple(sorted(riders)))
        hit = self._plans.get(key)
        if hit is not None:
            return hit
        d = self.grid._d
        o = self._idx[driver_id][0]
        order = []
        for r in sorted(key[1], key=lambda r: (d[o][self._idx[r][0]], r)):
            best, best_k = None, 0
            for k in range(len(order) + 1):
                cand = order[:k] + [r] + order[k:]
                length = self.route_for(driver_id, cand)
                if best is None or length < best - 1e-12:
                    best, best_k = length, k
            order.insert(best_k, r)
        order = tuple(order)
        res = (order,) + self.order_stats(driver_id, order)
        self._plans[key] = res
        return res

    def order_stats(self, driver_id, order):
        key = (driver_id, tuple(order))
        hit = self._stats.get(key)
        if hit is not None:
            return hit
        res = self._order_stats(driver_id, order)
        self._stats[key] = res
        return res

    def _order_stats(self, driver_id, order):
        prev = self.direct(driver_id)
        incs = []
        for k in range(1, len(order) + 1):
            cur = self.route_for(driver_id, order[:k])
            incs.append(cur - prev)
            prev = cur
        return prev, tuple(incs)

    def within_tolerance(self, driver_id, route_km):
        return route_km <= self.tolerance_mult * self.direct(driver_id) + 1e-9


@dataclass
class Assignment:
    driver_of: dict
    routes: dict

    @classmethod
    def empty(cls, state: DayState):
        return cls({r: None for r in state.rider_ids}, {d: () for d in state.driver_ids})

    @property
    def matches(self):
        return [(d, r) for d, order in self.routes.items() for r in order]

    def validate(self, state: DayState):
        seen = set()
        for d, order in self.routes.items():
            if len(order) > state.cap(d):
                raise ContractViolation(f"driver {d} over capacity")
            for r in order:
                if r in seen:
                    raise ContractViolation(f"rider {r} assigned twice")
                if self.driver_of.get(r) != d:
                    raise ContractViolation(f"rider {r} map/route mismatch")
                seen.add(r)
            if order and not state.within_tolerance(d, state.route_for(d, order)):
                raise ContractViolation(f"driver {d} exceeds detour tolerance")
        for r, d in self.driver_of.items():
            if d is not None and r not in seen:
                raise ContractViolation(f"rider {r} mapped but not routed")


def fitness(a: Assignment, state: DayState, alpha_r=0.5, beta_pso=1.0, check=True):
    """Weighted rider benefit, minus detour cost, plus points exchanged."""
    if check:
        a.validate(state)
    total = 0.0
    for d, order in a.routes.items():
        if order:
            total += route_value(state, d, tuple(order), alpha_r, beta_pso)
    return total


def route_value(state: DayState, d, order, alpha_r=0.5, beta_pso=1.0):
    """Fitness contribution of one driver's pickup order (cached)."""
    key = (d, order, alpha_r, beta_pso)
    hit = state._contrib.get(key)
    if hit is not None:
        return hit
    route, incs = state.order_stats(d, order)
    benefit = points = 0.0
    for r, inc in zip(order, incs):
        benefit += state.direct(r)
        points += driver_gain(state.scores[r], max(inc, 0.0), state.grid.max_detour, state.economy)
    val = alpha_r * benefit - (1 - alpha_r) * (route - state.direct(d)) + beta_pso * points
    state._contrib[key] = val
    return val


# -- particle encoding ---------------------------------------------------------


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    fitness: float = -math.inf
    best_position: np.ndarray = None
    best_fitness: float = -math.inf


def decode(position, state: DayState):
    pos = np.asarray(position)
    which = np.flatnonzero(pos >= 0)
    groups = {}
    if which.size:
        ks = np.minimum(np.floor(pos[which]).astype(int), len(state.driver_ids) - 1)
        for r_idx, k in zip(which.tolist(), ks.tolist()):
            groups.setdefault(state.driver_ids[k], []).append(state.rider_ids[r_idx])
    return groups


def _solo_detour(state, d, r):
    return state.plan(d, (r,))[1] - state.direct(d)


def repair_groups(groups, state: DayState):
    """Enforce capacity then tolerance per driver; returns kept groups."""
    kept = {}
    for d, riders in groups.items():
        key = (d, tuple(sorted(riders)))
        fixed = state._repairs.get(key)
        if fixed is None:
            fixed = _repair_one(d, riders, state)
            state._repairs[key] = fixed
        if fixed:
            kept[d] = list(fixed)
    return kept


def _repair_one(d, riders, state: DayState):
    riders = sorted(riders, key=lambda r: (_solo_detour(state, d, r), r))[: state.cap(d)]
    while riders:
        order, route, _ = state.plan(d, riders)
        if state.within_tolerance(d, route):
            break
        # drop the rider whose removal shortens the route most
        worst, worst_gain = None, None
        for r in riders:
            rest = [x for x in riders if x != r]
            gain = route - state.plan(d, rest)[1]
            if worst is None or gain > worst_gain + 1e-12 or (abs(gain - worst_gain) <= 1e-12 and r > worst):
                worst, worst_gain = r, gain
        riders = [x for x in riders if x != worst]
    return tuple(riders)


def groups_to_assignment(groups, state: DayState):
    a = Assignment.empty(state)
    for d, riders in groups.items():
        order = state.plan(d, riders)[0]
        a.routes[d] = order
        for r in order:
            a.driver_of[r] = d
    return a


UNASSIGNED_GENE = -0.5


def repair(particle: Particle, state: DayState):
    """Make a particle's position decode to a valid assignment, in place."""
    groups = decode(particle.position, state)
    kept = repair_groups(groups, state)
    keep = {r for riders in kept.values() for r in riders}
    for k, r in enumerate(state.rider_ids):
        if particle.position[k] >= 0 and r not in keep:
            particle.position[k] = UNASSIGNED_GENE
    return particle


def particle_assignment(particle: Particle, state: DayState):
    return groups_to_assignment(decode(particle.position, state), state)


def encode(a: Assignment, state: DayState):
    pos = np.full(len(state.rider_ids), UNASSIGNED_GENE)
    index = {d: k for k, d in enumerate(state.driver_ids)}
    for k, r in enumerate(state.rider_ids):
        d = a.driver_of.get(r)
        if d is not None:
            pos[k] = index[d] + 0.5
    return pos


def greedy_proximity(state: DayState):
    """Riders nearest to any driver first, each to the closest driver that fits."""
    d = state.grid._d
    if not state.driver_ids:
        return Assignment.empty(state)
    ranked = {}
    for r in state.rider_ids:
        ro = state._idx[r][0]
        ranked[r] = sorted(state.driver_ids, key=lambda x: (d[state._idx[x][0]][ro], x))
    def closest(r):
        return d[state._idx[ranked[r][0]][0]][state._idx[r][0]]
    groups = {}
    for r in sorted(state.rider_ids, key=lambda r: (closest(r), r)):
        for drv in ranked[r]:
            cur = groups.get(drv, [])
            if len(cur) >= state.cap(drv):
                continue
            if state.within_tolerance(drv, state.plan(drv, cur + [r])[1]):
                groups[drv] = cur + [r]
                break
    return groups_to_assignment(groups, state)


def evaluate(particle: Particle, state: DayState, p: PsoParams):
    a = particle_assignment(particle, state)
    particle.fitness = fitness(a, state, p.alpha_r, p.beta_pso, check=False)
    if particle.fitness > particle.best_fitness:
        particle.best_fitness = particle.fitness
        particle.best_position = particle.position.copy()
    return particle.fitness


@dataclass
class Swarm:
    particles: list
    gbest_position: np.ndarray
    gbest_fitness: float
    history: list = field(default_factory=list)


def _refresh_gbest(swarm: Swarm):
    for part in swarm.particles:
        if part.best_fitness > swarm.gbest_fitness:
            swarm.gbest_fitness = part.best_fitness
            swarm.gbest_position = part.best_position.copy()
    swarm.history.append(swarm.gbest_fitness)


def init_swarm(state: DayState, p: PsoParams, rng):
    n = len(state.rider_ids)
    if not state.driver_ids:
        pos = np.full(n, UNASSIGNED_GENE)
        part = Particle(pos, np.zeros(n), 0.0, pos.copy(), 0.0)
        return Swarm([part], pos.copy(), 0.0, [0.0])
    base = encode(greedy_proximity(state), state)
    n_drv = len(state.driver_ids)
    particles = []
    for k in range(p.swarm_size):
        pos = base.copy()
        if k > 0 and n:
            flip = rng.random(n) < p.perturb_prob
            choice = rng.integers(-1, n_drv, size=n) + 0.5
            pos = np.where(flip, choice, pos)
        part = Particle(pos, np.zeros(n))
        repair(part, state)
        evaluate(part, state, p)
        particles.append(part)
    swarm = Swarm(particles, particles[0].best_position.copy(), -math.inf)
    _refresh_gbest(swarm)
    return swarm


def pso_step(swarm: Swarm, state: DayState, p: PsoParams, rng):
    n = len(state.rider_ids)
    hi = len(state.driver_ids) - 1e-9
    for part in swarm.particles:
        r1 = rng.random(n)
        r2 = rng.random(n)
        part.velocity = (
            p.inertia * part.velocity
            + p.c1 * r1 * (part.best_position - part.position)
            + p.c2 * r2 * (swarm.gbest_position - part.position)
        )
        part.position = np.clip(part.position + part.velocity, -1.0, hi)
        repair(part, state)
        evaluate(part, state, p)
    _refresh_gbest(swarm)
    return swarm


def pso_solve(state: DayState, p: PsoParams, rng, return_swarm=False):
    swarm = init_swarm(state, p, rng)
    if state.driver_ids and state.rider_ids:
        for _ in range(p.iterations):
            pso_step(swarm, state, p, rng)
    best = groups_to_assignment(decode(swarm.gbest_position, state), state)
    if return_swarm:
        return best, swarm
    return best


def no_sharing_day(agents: dict, g: GridWorld):
    """Everyone drives alone: ``{agent_id: (km, minutes)}``."""
    out = {}
    for aid, trip in agents.items():
        km = g.distance(trip.origin, trip.destination)
        out[aid] = (km, km / AVERAGE_SPEED_KMH * 60.0)
    return out


MAX_ORACLE_RIDERS = 6
MAX_ORACLE_DRIVERS = 4


def brute_force_optimal(state: DayState, alpha_r=0.5, beta_pso=1.0):
    """Exhaustive best assignment over rider maps and pickup orders.

    Candidates must respect capacity and the detour tolerance. Ties go to
    the lexicographically smallest ``(driver index per rider, orders)`` key.
    """
    if len(state.rider_ids) > MAX_ORACLE_RIDERS or len(state.driver_ids) > MAX_ORACLE_DRIVERS:
        raise InputError("instance too large for exhaustive search")
    n_drv = len(state.driver_ids)
    best_val, best_key, best = None, None, Assignment.empty(state)
    if not state.rider_ids:
        return best
    # best order per (driver, rider subset), with its fitness contribution
    per_set = {}

    def best_for(didx, riders):
        key = (didx, riders)
        if key in per_set:
            return per_set[key]
        d = state.driver_ids[didx]
        if len(riders) > state.cap(d):
            per_set[key] = None
            return None
        out = None
        for order in itertools.permutations(riders):
            route, incs = state.order_stats(d, order)
            if not state.within_tolerance(d, route):
                continue
            val = sum(alpha_r * state.direct(r) for r in order)
            val -= (1 - alpha_r) * (route - state.direct(d))
            val += beta_pso * sum(
                driver_gain(state.scores[r], max(i, 0.0), state.grid.max_detour, state.economy)
                for r, i in zip(order, incs)
            )
            if out is None or val > out[0] + 1e-12:
                out = (val, order)
        per_set[key] = out
        return out

    for genes in itertools.product(range(-1, n_drv), repeat=len(state.rider_ids)):
        total = 0.0
        orders = []
        ok = True
        for didx in range(n_drv):
            riders = tuple(r for r, gk in zip(state.rider_ids, genes) if gk == didx)
            if not riders:
                orders.append(())
                continue
            res = best_for(didx, riders)
            if res is None:
                ok = False
                break
            total += res[0]
            orders.append(res[1])
        if not ok:
            continue
        key = (genes, tuple(orders))
        if best_val is None or total > best_val + 1e-12 or (abs(total - best_val) <= 1e-12 and key < best_key):
            best_val, best_key = total, key
    genes, orders = best_key
    a = Assignment.empty(state)
    for didx, order in enumerate(orders):
        d = state.driver_ids[didx]
        a.routes[d] = order
        for r in order:
            a.driver_of[r] = d
    return a
