import math

import numpy as np
import pytest

from arsim import metrics as M
from arsim.env import DayEnv, DayLog
from arsim.errors import InputError
from arsim.grid import GridWorld

from conftest import trip


def hand_log(served=None, vehicle_km=None, direct_km=None, traffic_km=None, roles=None, routes=None):
    served = served or {}
    direct_km = direct_km or {}
    vehicle_km = vehicle_km or {}
    roles = roles or {**{a: "driver" for a in routes or {}}, **{r: "rider" for r in served}}
    return DayLog(
        day=1, roles=roles, direct_km=direct_km, vehicle_km=vehicle_km, time_min={}, served=served,
        driver_route_km=routes or {}, driver_riders={}, util_series=[], density=np.zeros((2, 2)),
        solo_density=np.zeros((2, 2)), horizon_ticks=4, traffic_km=traffic_km or {}, scores={},
    )


def mean_difference_gini(v):
    # independent form: sum |x_i - x_j| / (2 n^2 mean)
    v = np.asarray(v, float)
    return np.abs(v[:, None] - v[None, :]).sum() / (2 * v.size**2 * v.mean())


def test_distance_and_co2_trivial():
    assert M.total_distance_and_co2([]) == (0.0, 0.0)
    lg = hand_log(vehicle_km={1: 2.5, 2: 0.0, 3: 1.5})
    km, co2 = M.total_distance_and_co2([lg, lg], eps_avg=0.0)
    assert km == 8.0 and co2 == 0.0
    assert M.total_distance_and_co2([lg])[1] == pytest.approx(4.0 * M.CO2_KG_PER_KM)


def test_detour_factor_alone_is_one():
    env = DayEnv(GridWorld(), {0: trip(0, 0, 4, 3)}, {}, {0: 0.5})
    while not env.done:
        env.advance()
    assert M.detour_factor(env.day_log(1)) == {0: pytest.approx(1.0)}


def test_detour_factor_skips_zero_direct():
    lg = hand_log(routes={0: 1.0, 1: 3.0}, direct_km={0: 0.0, 1: 2.0})
    assert M.detour_factor(lg) == {1: 1.5}


def test_trip_time_examples():
    assert M.solo_minutes(2.0) == pytest.approx(4.8)
    env = DayEnv(GridWorld(), {0: trip(0, 0, 7, 0), 1: trip(2, 2, 2, 7)}, {}, {0: 0.5, 1: 0.5})
    while not env.done:
        env.advance()
    lg = env.day_log(1)
    expect = np.mean([M.solo_minutes(km) for km in lg.direct_km.values()])
    assert M.avg_trip_time(lg) == pytest.approx(expect)


def test_utilization_formula():
    assert M.utilization_ratio(2, 0) == 1.0
    assert M.utilization_ratio(2, 2) == 2.0
    assert M.utilization_ratio(0, 3) is None


def test_acceptance_hand_count():
    assert M.acceptance_rate(hand_log(served={1: True, 2: True})) == 1.0
    assert M.acceptance_rate(hand_log(served={1: False, 2: False})) == 0.0
    five = {1: True, 2: False, 3: True, 4: True, 5: False}
    assert M.acceptance_rate(hand_log(served=five)) == 3 / 5
    assert M.acceptance_rate(hand_log()) is None


def test_density_examples():
    assert np.all(M.density_map(np.zeros((3, 3)), 10) == 0)
    counts = np.zeros((3, 3))
    counts[1, 2] = 40
    dens = M.density_map(counts, 40)
    assert dens[1, 2] == 1.0 and dens.sum() == 1.0
    lg = hand_log()
    lg.density = counts.copy()
    lg.solo_density = counts.copy()
    lg.horizon_ticks = 40
    shared, dense, solo, diff = M.traffic_density([lg], threshold=0.5)
    assert dense == 1 and np.all(diff == 0)
    assert M.density_reduction([lg]) == 0.0


def test_gini_trivial_cases():
    assert M.gini(np.full(7, 3.0)) == pytest.approx(0.0, abs=1e-12)
    for n in (2, 5, 40):
        v = np.zeros(n)
        v[3 % n] = 9.0
        assert M.gini(v) == pytest.approx((n - 1) / n, abs=1e-12)
    assert M.gini(np.zeros(4)) == 0.0


def test_gini_matches_mean_difference_form():
    rng = np.random.default_rng(0)
    for _ in range(30):
        v = rng.exponential(size=int(rng.integers(2, 60)))
        assert M.gini(v) == pytest.approx(mean_difference_gini(v), abs=1e-12)


def test_lorenz_endpoints_and_errors():
    x, y = M.lorenz_curve([3.0, 1.0, 0.0, 6.0])
    assert (x[0], y[0], x[-1], y[-1]) == (0.0, 0.0, 1.0, 1.0)
    assert np.allclose(y, [0, 0, 0.1, 0.4, 1.0])
    with pytest.raises(InputError):
        M.lorenz_curve([1.0, -1.0])
    with pytest.raises(InputError):
        M.lorenz_curve([])


def test_floor_benefits_counts_negatives():
    v, n = M.floor_benefits([1.0, -2.0, 0.0, -0.1])
    assert n == 2 and np.array_equal(v, [1.0, 0.0, 0.0, 0.0])


def test_lorenz_surface_corners_and_monotone():
    rng = np.random.default_rng(1)
    p, c = rng.exponential(size=30), rng.exponential(size=30)
    q, s = M.lorenz_surface(p, c, n_grid=11)
    assert s[0, 0] == 0.0 and s[-1, -1] == pytest.approx(1.0)
    assert np.all(np.diff(s, axis=0) >= -1e-15) and np.all(np.diff(s, axis=1) >= -1e-15)
    out = M.lorenz_and_gini(p - 0.5, c, n_grid=11)
    assert out["floored_distance"] == int(np.sum(p < 0.5)) and out["floored_traffic"] == 0


def test_agent_benefits_sum_to_system_totals():
    env = DayEnv(GridWorld(6, 6, 0.5), {0: trip(0, 0, 5, 0)}, {1: trip(1, 0, 4, 0), 2: trip(0, 5, 5, 5)}, {0: 0.3, 1: 0.6, 2: 0.5})
    env.assign(0, 1)
    while not env.done:
        env.advance()
    lg = env.day_log(1)
    ids, personal, community = M.agent_benefits([lg, lg])
    assert ids == [0, 1, 2]
    assert personal.sum() == pytest.approx(2 * (sum(lg.direct_km.values()) - M.day_distance(lg)))
    assert community.sum() == pytest.approx(2 * (sum(lg.direct_km.values()) - sum(lg.traffic_km.values())))
    # shared segments split the traffic of the shared vehicle
    assert sum(lg.traffic_km.values()) == pytest.approx(M.day_distance(lg))


def test_reintegration_all_next_day_returns():
    w = M.ReintegrationWeights()
    drops = [(a, 5) for a in range(4)]
    rets = [(a, 5, 6) for a in range(4)]
    out = M.reintegration_score(drops, rets, w)
    assert out["r_basic"] == 1.0 and out["r_quick"] == 1.0 and out["r_stable"] == 1.0
    assert out["r_time"] == math.exp(-w.lam)
    assert out["reint"] == pytest.approx(25.0 * (3.0 + math.exp(-0.2)), abs=1e-12)


def test_reintegration_no_returns_and_no_dropouts():
    out = M.reintegration_score([(1, 2), (2, 3)], [])
    assert out["r_basic"] == out["r_time"] == out["r_quick"] == out["r_stable"] == 0.0
    assert out["reint"] == 0.0
    assert M.reintegration_score([], [])["reint"] is None


def test_reintegration_unstable_return():
    # agent 1 returns then drops out again; agent 2 stays
    drops = [(1, 2), (2, 2), (1, 8)]
    rets = [(1, 2, 4), (2, 2, 10)]
    out = M.reintegration_score(drops, rets, M.ReintegrationWeights(lam=0.5, tau=3))
    assert out["r_basic"] == pytest.approx(2 / 3)
    assert out["r_quick"] == 0.5 and out["r_stable"] == 0.5
    assert out["r_time"] == pytest.approx((math.exp(-1.0) + math.exp(-4.0)) / 2)


def test_reintegration_weights_validated():
    with pytest.raises(InputError):
        M.ReintegrationWeights(alpha=0.5)
    with pytest.raises(InputError):
        M.ReintegrationWeights(lam=0.0)


def test_ratio_ci_examples():
    mean, sd, cv, lo, hi = M.ratio_confidence_interval([1.2] * 10)
    assert (lo, hi) == (1.2, 1.2) and sd == 0.0
    z = np.random.default_rng(2).normal(size=100)
    series = 1.14 + 0.25 * (z - z.mean()) / z.std(ddof=1)
    mean, sd, cv, lo, hi = M.ratio_confidence_interval(series)
    assert lo == pytest.approx(1.14 - 2.5758 * 0.025, abs=1e-4)
    assert lo == pytest.approx(1.0756, abs=1e-4)
    assert cv == pytest.approx(0.25 / 1.14)
    with pytest.raises(InputError):
        M.ratio_confidence_interval([1.0])
