"""Performance, congestion, fairness and reintegration metrics over day logs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InputError
from .grid import AVERAGE_SPEED_KMH

log = logging.getLogger(__name__)

CO2_KG_PER_KM = 0.192


@dataclass(frozen=True)
class ReintegrationWeights:
    alpha: float = 0.25
    beta: float = 0.25
    gamma: float = 0.25
    delta: float = 0.25
    lam: float = 0.2
    tau: float = 3.0

    def __post_init__(self):
        w = (self.alpha, self.beta, self.gamma, self.delta)
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise InputError("reintegration weights must be nonnegative and sum to 1")
        if not self.lam > 0:
            raise InputError("reintegration lambda must be positive")
        if self.tau < 0:
            raise InputError("reintegration tau must be nonnegative")


# -- distance, detour, time, utilization -----------------------------------------


def day_distance(day_log):
    return float(sum(day_log.vehicle_km.values()))


def total_distance_and_co2(logs, eps_avg=CO2_KG_PER_KM):
    km = float(sum(day_distance(lg) for lg in logs))
    return km, km * eps_avg


def detour_factor(day_log):
    """``route / direct`` for every driver of the day."""
    out = {}
    for d, route in day_log.driver_route_km.items():
        direct = day_log.direct_km[d]
        if direct <= 0:
            log.warning("driver %s has zero direct distance; excluded", d)
            continue
        out[d] = route / direct
    return out


def avg_trip_time(day_log):
    """Mean minutes over the day's participating agents."""
    vals = list(day_log.time_min.values())
    return float(np.mean(vals)) if vals else 0.0


def solo_minutes(km):
    return km / AVERAGE_SPEED_KMH * 60.0


def vehicle_utilization(day_log):
    """Per-tick occupancy ratios (ticks without drivers are skipped)."""
    return np.asarray(day_log.util_series, dtype=float)


def utilization_ratio(n_drivers, n_travelling_riders):
    if n_drivers <= 0:
        return None
    return (n_drivers + n_travelling_riders) / n_drivers


def acceptance_rate(day_log):
    """Fraction of riders picked up, or ``None`` when there were no riders."""
    if not day_log.served:
        return None
    return sum(1 for v in day_log.served.values() if v) / len(day_log.served)


# -- congestion ------------------------------------------------------------------


def density_map(counts, ticks):
    """Time-averaged vehicles per cell from summed vehicle-ticks."""
    counts = np.asarray(counts, dtype=float)
    if ticks <= 0:
        return np.zeros_like(counts)
    return counts / ticks


def traffic_density(logs, threshold=0.5):
    """Average density maps with and without sharing.

    Returns ``(shared_map, dense_count, solo_map, difference_map)``; the
    difference is ``solo - shared`` so positive cells gained from sharing.
    """
    logs = list(logs)
    if not logs:
        return np.zeros((0, 0)), 0, np.zeros((0, 0)), np.zeros((0, 0))
    ticks = sum(lg.horizon_ticks for lg in logs)
    shared = density_map(sum(lg.density for lg in logs), ticks)
    solo = density_map(sum(lg.solo_density for lg in logs), ticks)
    dense = int(np.sum(shared > threshold))
    return shared, dense, solo, solo - shared


def density_reduction(logs):
    """Relative drop in total vehicle-ticks from solo driving to sharing."""
    shared = sum(float(lg.density.sum()) for lg in logs)
    solo = sum(float(lg.solo_density.sum()) for lg in logs)
    return 0.0 if solo <= 0 else 1.0 - shared / solo


# -- fairness --------------------------------------------------------------------


def floor_benefits(values):
    """Clip negatives to zero; returns ``(array, n_floored)``."""
    v = np.asarray(values, dtype=float)
    neg = int(np.sum(v < 0))
    return np.maximum(v, 0.0), neg


def lorenz_curve(values):
    """Population shares and cumulative benefit shares, both from 0 to 1."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise InputError("Lorenz curve of an empty vector")
    if np.any(v < 0):
        raise InputError("Lorenz curve needs nonnegative values")
    x = np.arange(v.size + 1) / v.size
    total = v.sum()
    if total <= 0:
        return x, x.copy()
    y = np.concatenate(([0.0], np.cumsum(v) / total))
    y[-1] = 1.0
    return x, y


def gini(values):
    """``1 - 2 * area under the Lorenz curve`` (trapezoid rule)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or v.sum() <= 0:
        return 0.0
    x, y = lorenz_curve(v)
    area = float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))
    return min(max(1.0 - 2.0 * area, 0.0), 1.0)


def lorenz_surface(personal, community, n_grid=21):
    """Joint cumulative benefit share on a grid of population quantiles.

    ``S[a, b]`` is the combined share of both benefits held by agents in
    the lowest ``q_a`` fraction by personal benefit and lowest ``q_b`` by
    community benefit.
    """
    p = np.asarray(personal, dtype=float)
    c = np.asarray(community, dtype=float)
    n = p.size
    q = np.linspace(0.0, 1.0, n_grid)
    rank_p = np.empty(n)
    rank_p[np.argsort(p, kind="stable")] = np.arange(1, n + 1) / n
    rank_c = np.empty(n)
    rank_c[np.argsort(c, kind="stable")] = np.arange(1, n + 1) / n
    total = p.sum() + c.sum()
    surface = np.zeros((n_grid, n_grid))
    if total <= 0:
        return q, surface
    for a, qa in enumerate(q):
        in_a = rank_p <= qa + 1e-12
        for b, qb in enumerate(q):
            sel = in_a & (rank_c <= qb + 1e-12)
            surface[a, b] = (p[sel].sum() + c[sel].sum()) / total
    return q, surface


def agent_benefits(logs):
    """Per-agent totals of distance saved and traffic avoided over all days."""
    personal, community = {}, {}
    for lg in logs:
        for aid, direct in lg.direct_km.items():
            personal[aid] = personal.get(aid, 0.0) + direct - lg.vehicle_km[aid]
            community[aid] = community.get(aid, 0.0) + direct - lg.traffic_km.get(aid, 0.0)
    ids = sorted(personal)
    return ids, np.array([personal[i] for i in ids]), np.array([community[i] for i in ids])


def lorenz_and_gini(personal, community, n_grid=21):
    """Lorenz surface and Gini per benefit axis after flooring negatives."""
    p, n_p = floor_benefits(personal)
    c, n_c = floor_benefits(community)
    q, surface = lorenz_surface(p, c, n_grid)
    return {
        "quantiles": q,
        "surface": surface,
        "gini_distance": gini(p),
        "gini_traffic": gini(c),
        "floored_distance": n_p,
        "floored_traffic": n_c,
    }


# -- reintegration ---------------------------------------------------------------


def reintegration_score(dropouts, returns, w: ReintegrationWeights = ReintegrationWeights()):
    """Composite return-behaviour score on a 0 to 100 scale.

    ``dropouts`` lists ``(agent, day)`` events, ``returns`` lists
    ``(agent, dropout_day, return_day)``. Returns a dict of components and
    ``reint``; with no dropouts ``reint`` is ``None`` (not applicable).
    """
    n_d = len(dropouts)
    if n_d == 0:
        return {"r_basic": None, "r_time": None, "r_quick": None, "r_stable": None, "reint": None, "mean_return_days": None}
    n_r = len(returns)
    gaps = np.array([r - o for _, o, r in returns], dtype=float)
    r_basic = n_r / n_d
    if n_r:
        r_time = math.fsum(np.exp(-w.lam * gaps)) / n_r
        r_quick = float(np.mean(gaps <= w.tau))
        mean_gap = float(np.mean(gaps))
    else:
        r_time = r_quick = 0.0
        mean_gap = None
    first_return = {}
    for a, _, r in returns:
        first_return[a] = min(r, first_return.get(a, math.inf))
    stable = sum(1 for a, day in first_return.items() if not any(b == a and d > day for b, d in dropouts))
    r_stable = stable / len(first_return) if first_return else 0.0
    reint = 100.0 * (w.alpha * r_basic + w.beta * r_time + w.gamma * r_quick + w.delta * r_stable)
    return {"r_basic": r_basic, "r_time": r_time, "r_quick": r_quick, "r_stable": r_stable, "reint": reint, "mean_return_days": mean_gap}


# -- driver/rider balance --------------------------------------------------------


def ratio_confidence_interval(series, level=0.99):
    """Normal-approximation CI of the mean ratio: ``(mean, sd, cv, lo, hi)``."""
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise InputError("need at least two ratio observations")
    if not 0 < level < 1:
        raise InputError("confidence level must lie in (0, 1)")
    if np.all(x == x[0]):
        mean = float(x[0])
        return mean, 0.0, 0.0 if mean else math.inf, mean, mean
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd < 1e-12 * max(abs(mean), 1.0):
        sd = 0.0
    z = float(norm.ppf(0.5 + level / 2))
    half = z * sd / math.sqrt(x.size)
    cv = sd / mean if mean else math.inf
    return mean, sd, cv, mean - half, mean + half


def driver_rider_ratios(logs):
    """Daily ``drivers / riders``; days without riders are skipped."""
    return [lg.n_drivers / lg.n_riders for lg in logs if lg.n_riders > 0]
