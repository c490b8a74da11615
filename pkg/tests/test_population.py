import math

import numpy as np
import pytest

from arsim.errors import ConfigError, ConsistencyError
from arsim.population import (
    ACTIVE,
    AgentRecord,
    LifecycleState,
    PopulationCensus,
    PopulationParams,
    birth_probability,
    dropout_probability,
    initial_altruism,
    network_factor,
    phase_factor,
    reputation_factor,
    step_population,
    urgency_factor,
)


def roster_of(scores, n_unenrolled=0):
    roster = {i: AgentRecord(i, s, LifecycleState(ACTIVE)) for i, s in enumerate(scores)}
    for k in range(n_unenrolled):
        i = len(scores) + k
        roster[i] = AgentRecord(i, 0.5)
    return roster


def test_dropout_examples():
    p = PopulationParams()
    assert dropout_probability(0.0, p, 1.0) == pytest.approx(p.alpha_bd)
    assert dropout_probability(1.0, p, 1.0) == pytest.approx(p.gamma_bd - p.delta_bd)
    assert dropout_probability(0.1, p, 1.0) == pytest.approx(0.3 * math.exp(-0.5), abs=1e-12)
    assert 0.3 * math.exp(-0.5) == pytest.approx(0.18196, abs=1e-5)


def test_dropout_degenerate_s_max():
    with pytest.raises(ConfigError):
        dropout_probability(0.6, PopulationParams(), 0.5)


def test_default_dropout_is_continuous_at_threshold():
    p = PopulationParams()
    below = dropout_probability(p.s_th - 1e-12, p, 1.0)
    at = dropout_probability(p.s_th, p, 1.0)
    assert below == pytest.approx(at, abs=1e-9)


def test_dropout_nonincreasing():
    p = PopulationParams()
    s = np.linspace(0, 1, 201)
    vals = [dropout_probability(x, p, 1.0) for x in s]
    assert all(b <= a + 1e-15 for a, b in zip(vals[:-1], vals[1:]))


def test_reputation_neutral():
    assert reputation_factor(0.5, PopulationParams()) == 1.0


def test_birth_probability_pre_adoption_factor_product():
    p = PopulationParams()
    census = PopulationCensus(n_active=0, n_never=50, n_dropout=0, n_total=50)
    day, horizon, mean_alt = 30, 100, 0.62
    # factors recomputed from the configured schedule at rho = 0
    phase = p.phase_shares[0] / p.phase_shares[1]
    urgency = 1.0 + 2.0 * (day - 1) / (horizon - 1)
    network = p.network_factors[0]
    reputation = 1.0 + 0.4 * (mean_alt - 0.5)
    expect = p.p_base * phase * urgency * network * reputation
    assert birth_probability(census, day, mean_alt, p, horizon) == pytest.approx(expect, rel=1e-12)


def test_birth_probability_saturated_is_clamped():
    p = PopulationParams(p_base=5.0)
    census = PopulationCensus(n_active=10, n_never=0, n_dropout=0, n_total=10)
    assert birth_probability(census, 100, 1.0, p) == 1.0


def test_factor_schedules():
    p = PopulationParams()
    assert phase_factor(0.5, p) == 1.0
    assert phase_factor(0.05, p) == pytest.approx(0.12 / 0.18)
    assert network_factor(0.3, p) == 1.0 and network_factor(0.7, p) == 1.2 and network_factor(0.9, p) == 0.8
    assert urgency_factor(1, 100, p) == 1.0 and urgency_factor(100, 100, p) == 3.0
    for day in range(1, 101):
        assert 1.0 <= urgency_factor(day, 100, p) <= 3.0


def test_initial_altruism_cases():
    p = PopulationParams(jitter=0.0)
    rng = np.random.default_rng(0)
    assert initial_altruism(0.5, 0.0, 0.0, 0.0, rng, p) == p.phase_base_scores[1]
    assert initial_altruism(0.05, 1.0, 1.0, 0.0, rng, PopulationParams(phase_base_scores=(0.95, 0.5, 0.3))) <= 1.0
    early = initial_altruism(0.05, 0.0, 0.0, 0.0, np.random.default_rng(4), PopulationParams())
    late = initial_altruism(0.95, 0.0, 0.0, 0.0, np.random.default_rng(4), PopulationParams())
    assert early > late


def test_zero_probabilities_keep_census():
    p = PopulationParams(alpha_bd=0.0, gamma_bd=0.0, delta_bd=0.0, p_base=0.0)
    roster = roster_of([0.1, 0.7, 0.3], n_unenrolled=2)
    census = PopulationCensus.from_roster(roster)
    ev, new = step_population(roster, census, 1, np.random.default_rng(0), p)
    assert new == census
    assert ev.births == ev.dropouts == ev.returns == []


def test_census_identity_and_score_retention():
    rng = np.random.default_rng(5)
    roster = roster_of(list(rng.random(30)), n_unenrolled=20)
    census = PopulationCensus.from_roster(roster)
    stored = {}
    for day in range(1, 60):
        before = census.n_active
        ev, census = step_population(roster, census, day, rng, PopulationParams(), horizon=60)
        assert census.n_active - before == len(ev.births) - len(ev.dropouts) + len(ev.returns)
        assert census.n_active + census.n_dropout + census.n_never == census.n_total
        for a, _, _ in ev.returns:
            assert roster[a].score == stored[a]
        for a in ev.dropouts:
            stored[a] = roster[a].score
            assert roster[a].state.last_dropout_day == day


def test_census_mismatch_detected():
    roster = roster_of([0.5, 0.5])
    with pytest.raises(ConsistencyError):
        step_population(roster, PopulationCensus(1, 0, 1, 2), 1, np.random.default_rng(0), PopulationParams())


def test_zero_score_dropout_frequency():
    # one score-0 agent; whenever it drops we put it back so every day is a trial
    p = PopulationParams(p_base=0.0)
    rng = np.random.default_rng(21)
    roster = roster_of([0.0, 0.9])
    census = PopulationCensus.from_roster(roster)
    drops, n = 0, 1000
    for day in range(1, n + 1):
        roster[1].state.status = ACTIVE
        census = PopulationCensus.from_roster(roster)
        ev, census = step_population(roster, census, day, rng, p, horizon=n)
        if 0 in ev.dropouts:
            drops += 1
            roster[0].state.status = ACTIVE
    sigma = math.sqrt(p.alpha_bd * (1 - p.alpha_bd) / n)
    assert abs(drops / n - p.alpha_bd) <= 3 * sigma


def test_params_validation():
    with pytest.raises(ConfigError):
        PopulationParams(alpha_bd=1.5)
    with pytest.raises(ConfigError):
        PopulationParams(delta_bd=0.5, gamma_bd=0.1)
