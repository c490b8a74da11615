"""Property tests for invariants that must hold for every input."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from arsim import metrics as M
from arsim.economy import EconomyParams, ScoreLedger, apply_update, driver_gain, rider_cost
from arsim.grid import GridWorld, RouteState, TripSpec, feasible_riders, step_toward
from arsim.marl.nets import masked_softmax
from arsim.population import PopulationParams, dropout_probability
from arsim.roles import DRIVER, assign_roles

unit = st.floats(0.0, 1.0)
finite = st.floats(-1e6, 1e6, allow_nan=False)
benefits = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.0, 1e3))
G = GridWorld(7, 7, 0.3)
cells = st.tuples(st.integers(0, 6), st.integers(0, 6))


@st.composite
def trips(draw):
    a = draw(cells)
    b = draw(cells.filter(lambda c: c != a))
    return TripSpec(a, b)


@given(unit, st.floats(0, G.max_detour), st.floats(0, G.max_detour), st.floats(0.01, 5))
def test_driver_gain_monotone_in_detour(s, d1, d2, alpha):
    p = EconomyParams(alpha_s=alpha)
    lo, hi = sorted((d1, d2))
    assert driver_gain(s, lo, G.max_detour, p) >= driver_gain(s, hi, G.max_detour, p)
    assert driver_gain(s, hi, G.max_detour, p) >= 0.0


@given(unit, unit, st.floats(0, G.max_detour))
def test_driver_gain_monotone_in_rider_score(s1, s2, d):
    lo, hi = sorted((s1, s2))
    assert driver_gain(lo, d, G.max_detour) <= driver_gain(hi, d, G.max_detour)


@given(st.floats(0, 10), st.floats(0.01, 5))
def test_rider_pays_scaled_gain(gain, beta):
    assert rider_cost(gain, EconomyParams(beta_s=beta)) == -beta * gain


@given(unit, finite)
def test_clamp_range_and_idempotence(s, delta):
    once = apply_update(s, delta)
    assert 0.0 <= once <= 1.0
    assert apply_update(once, 0.0) == once


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.floats(0, G.max_detour)), max_size=30),
       st.lists(unit, min_size=6, max_size=6))
def test_ledger_keeps_scores_in_unit_interval(matches, start):
    scores = dict(enumerate(start))
    ledger = ScoreLedger()
    for d, r, det in matches:
        if d != r:
            ledger.record_match(d, r, scores[r], det, G.max_detour, EconomyParams(alpha_s=3.0, beta_s=2.0))
    ledger.apply(scores)
    assert all(0.0 <= v <= 1.0 for v in scores.values())


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)), st.data())
def test_masked_softmax_is_a_distribution(logits, data):
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=logits.size, max_size=logits.size)))
    mask[-1] = True
    p = masked_softmax(logits, mask)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)
    assert np.all(p[~mask] == 0)


@given(benefits)
def test_lorenz_shape(v):
    x, y = M.lorenz_curve(v)
    assert (x[0], y[0], x[-1], y[-1]) == (0.0, 0.0, 1.0, 1.0)
    assert np.all(np.diff(y) >= 0)
    # convex: slopes never decrease
    assert np.all(np.diff(np.diff(y) / np.diff(x)) >= -1e-9)
    assert np.all(y <= x + 1e-12)


@given(benefits, st.floats(0.01, 100), st.randoms(use_true_random=False))
def test_gini_bounds_and_invariances(v, scale, rnd):
    g = M.gini(v)
    assert 0.0 <= g <= 1.0
    perm = list(v)
    rnd.shuffle(perm)
    assert M.gini(perm) == pytest.approx(g, abs=1e-9)
    assert M.gini(v * scale) == pytest.approx(g, abs=1e-9)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(1, 50)), max_size=20), st.data())
def test_reintegration_components_in_unit_interval(drops, data):
    returns = []
    for a, day in drops:
        if data.draw(st.booleans()):
            returns.append((a, day, day + data.draw(st.integers(1, 10))))
    out = M.reintegration_score(drops, returns)
    if not drops:
        assert out["reint"] is None
        return
    for key in ("r_basic", "r_time", "r_quick", "r_stable"):
        assert 0.0 <= out[key] <= 1.0
    assert 0.0 <= out["reint"] <= 100.0


@given(arrays(np.float64, st.integers(2, 50), elements=st.floats(0.1, 5)), st.floats(0.5, 0.999))
def test_ratio_ci_brackets_mean(x, level):
    mean, sd, cv, lo, hi = M.ratio_confidence_interval(x, level)
    assert lo <= mean <= hi and sd >= 0


@given(st.integers(0, 50), st.integers(0, 50))
def test_utilization_at_least_one(d, r):
    u = M.utilization_ratio(d, r)
    assert u is None if d == 0 else u >= 1.0


@given(cells, cells)
def test_step_toward_closes_one_cell(a, b):
    nxt = step_toward(G, a, b)
    if a == b:
        assert nxt == a
    else:
        assert G.distance(nxt, b) == pytest.approx(G.distance(a, b) - G.cell_km)


@given(trips(), st.lists(trips(), min_size=1, max_size=5), st.integers(1, 4))
@settings(max_examples=60)
def test_feasible_riders_respect_tolerance(driver, rider_list, cap):
    riders = dict(enumerate(rider_list))
    state = RouteState(driver)
    direct = G.distance(driver.origin, driver.destination)
    for rid in feasible_riders(G, state, riders, 3 * G.cell_km, cap):
        assert state.total_with(G, rid, riders[rid]) <= 1.5 * direct + 1e-9
        assert G.distance(driver.origin, riders[rid].origin) <= 3 * G.cell_km + 1e-9


@given(st.lists(unit, min_size=1, max_size=30), st.integers(0, 2**32 - 1))
def test_low_scores_always_drive(scores, seed):
    roles = assign_roles(range(len(scores)), dict(enumerate(scores)), np.random.default_rng(seed))
    for i, s in enumerate(scores):
        if s <= 0.2:
            assert roles[i] == DRIVER


@given(unit, st.floats(0.51, 1.0))
def test_dropout_probability_is_probability(s, s_max):
    assert 0.0 <= dropout_probability(s, PopulationParams(), s_max) <= 1.0
