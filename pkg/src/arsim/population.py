"""Birth, dropout and re-entry of agents."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError, ConsistencyError, InputError

UNENROLLED = "unenrolled"
ACTIVE = "active"
INACTIVE = "inactive"


@dataclass
class LifecycleState:
    status: str = UNENROLLED
    last_dropout_day: Optional[int] = None
    dropout_count: int = 0
    return_count: int = 0


@dataclass
class AgentRecord:
    id: int
    score: float
    state: LifecycleState = field(default_factory=LifecycleState)
    role: Optional[str] = None
    trip: object = None

    @property
    def active(self):
        return self.state.status == ACTIVE


@dataclass(frozen=True)
class PopulationParams:
    alpha_bd: float = 0.3
    beta_bd: float = 5.0
    gamma_bd: float = 0.3 * math.exp(-2.5)
    delta_bd: float = 0.02
    s_th: float = 0.5
    p_base: float = 0.02
    # adoption-rate band edges and adopter shares for early / majority / late
    phase_edges: tuple = (0.16, 0.84)
    phase_shares: tuple = (0.12, 0.18, 0.08)
    urgency_range: tuple = (1.0, 3.0)
    network_edges: tuple = (0.5, 0.85)
    network_factors: tuple = (1.0, 1.2, 0.8)
    reputation_slope: float = 0.4
    # newcomer scores
    phase_base_scores: tuple = (0.7, 0.5, 0.35)
    network_bonus: float = 0.1
    scarcity_bonus: float = 0.1
    dropout_penalty: float = 0.2
    jitter: float = 0.05
    initial_active_fraction: float = 0.8

    def __post_init__(self):
        if not (0 <= self.alpha_bd <= 1):
            raise ConfigError("population.alpha_bd", "must lie in [0, 1]")
        if not (0 <= self.gamma_bd <= 1):
            raise ConfigError("population.gamma_bd", "must lie in [0, 1]")
        if self.delta_bd > self.gamma_bd:
            raise ConfigError("population.delta_bd", "must not exceed gamma_bd")
        if not (0 <= self.s_th <= 1):
            raise ConfigError("population.s_th", "must lie in [0, 1]")
        lo, hi = self.urgency_range
        if not (1.0 <= lo <= hi <= 3.0):
            raise ConfigError("population.urgency_range", "must lie within [1.0, 3.0]")
        if not (0 <= self.initial_active_fraction <= 1):
            raise ConfigError("population.initial_active_fraction", "must lie in [0, 1]")
        gap = self.alpha_bd * math.exp(-self.beta_bd * self.s_th) - self.gamma_bd
        if abs(gap) > 1e-6:
            warnings.warn(f"dropout probability is discontinuous at s_th (jump {gap:.4g})", stacklevel=2)


@dataclass
class PopulationCensus:
    n_active: int
    n_never: int
    n_dropout: int
    n_total: int

    def check(self):
        if min(self.n_active, self.n_never, self.n_dropout) < 0:
            raise ConsistencyError(f"negative census count: {self}")
        if self.n_active + self.n_never + self.n_dropout != self.n_total:
            raise ConsistencyError(f"census does not add up: {self}")

    @classmethod
    def from_roster(cls, roster):
        counts = {ACTIVE: 0, INACTIVE: 0, UNENROLLED: 0}
        for a in roster.values():
            counts[a.state.status] += 1
        return cls(counts[ACTIVE], counts[UNENROLLED], counts[INACTIVE], len(roster))

    @property
    def adoption_rate(self):
        return (self.n_total - self.n_never) / self.n_total


def dropout_probability(s, p: PopulationParams, s_max):
    """Daily dropout probability for an agent with score ``s``."""
    if s < p.s_th:
        prob = p.alpha_bd * math.exp(-p.beta_bd * s)
    else:
        if s_max <= p.s_th:
            raise ConfigError("population.s_th", f"observed maximum {s_max} does not exceed threshold")
        prob = p.gamma_bd - p.delta_bd * (s - p.s_th) / (s_max - p.s_th)
    return min(1.0, max(0.0, prob))


def _band(x, edges):
    k = 0
    while k < len(edges) and x >= edges[k]:
        k += 1
    return k


def phase_factor(rho, p: PopulationParams):
    shares = p.phase_shares
    return shares[_band(rho, p.phase_edges)] / shares[1]


def urgency_factor(day, horizon, p: PopulationParams):
    lo, hi = p.urgency_range
    if horizon <= 1:
        return lo
    frac = min(max((day - 1) / (horizon - 1), 0.0), 1.0)
    return lo + (hi - lo) * frac


def network_factor(rho, p: PopulationParams):
    lo, hi = p.network_edges
    if rho < lo:
        return p.network_factors[0]
    if rho <= hi:
        return p.network_factors[1]
    return p.network_factors[2]


def reputation_factor(mean_altruism, p: PopulationParams):
    return 1.0 + p.reputation_slope * (mean_altruism - 0.5)


def birth_probability(census: PopulationCensus, day, mean_altruism, p: PopulationParams, horizon=100):
    """Per-day probability that an unenrolled agent joins."""
    if census.n_total <= 0:
        raise InputError("empty population")
    rho = census.adoption_rate
    prob = (
        p.p_base
        * phase_factor(rho, p)
        * urgency_factor(day, horizon, p)
        * network_factor(rho, p)
        * reputation_factor(mean_altruism, p)
    )
    return min(1.0, max(0.0, prob))


def initial_altruism(rho, network_activity, scarcity, recent_dropout_rate, rng, p: PopulationParams = None):
    """Starting score for a newcomer.

    Starts from the adoption-phase base (higher for early joiners), adds
    bonuses for network activity and scarcity, subtracts for recent dropouts,
    and adds uniform jitter of half-width ``p.jitter``. Neutral inputs are
    all zero.
    """
    p = p or PopulationParams()
    s = p.phase_base_scores[_band(rho, p.phase_edges)]
    s += p.network_bonus * min(max(network_activity, 0.0), 1.0)
    s += p.scarcity_bonus * min(max(scarcity, 0.0), 1.0)
    s -= p.dropout_penalty * min(max(recent_dropout_rate, 0.0), 1.0)
    if p.jitter > 0:
        s += rng.uniform(-p.jitter, p.jitter)
    return min(1.0, max(0.0, s))


@dataclass
class PopulationEvents:
    births: list = field(default_factory=list)
    dropouts: list = field(default_factory=list)
    returns: list = field(default_factory=list)  # (agent_id, dropout_day, return_day)


def step_population(roster, census: PopulationCensus, day, rng, p: PopulationParams, horizon=100, recent_dropout_rate=0.0):
    """Advance lifecycle states by one day.

    Dropouts are drawn for agents active at the start of the step, returns
    for agents already inactive, births from the unenrolled pool, in that
    order and in sorted-id order within each group.
    """
    if PopulationCensus.from_roster(roster) != census:
        raise ConsistencyError(f"census {census} does not match roster")
    ids = sorted(roster)
    active = [i for i in ids if roster[i].state.status == ACTIVE]
    inactive = [i for i in ids if roster[i].state.status == INACTIVE]
    never = [i for i in ids if roster[i].state.status == UNENROLLED]
    enrolled = active + inactive
    s_max = max((roster[i].score for i in enrolled), default=0.0)
    s_max = max(s_max, p.s_th + 1e-9)
    mean_alt = sum(roster[i].score for i in active) / len(active) if active else 0.5

    ev = PopulationEvents()
    for i in active:
        if rng.random() < dropout_probability(roster[i].score, p, s_max):
            st = roster[i].state
            st.status = INACTIVE
            st.last_dropout_day = day
            st.dropout_count += 1
            ev.dropouts.append(i)
    for i in inactive:
        if rng.random() < 1.0 - dropout_probability(roster[i].score, p, s_max):
            st = roster[i].state
            st.status = ACTIVE
            st.return_count += 1
            ev.returns.append((i, st.last_dropout_day, day))
    pb = birth_probability(census, day, mean_alt, p, horizon)
    rho = census.adoption_rate
    for i in never:
        if rng.random() < pb:
            roster[i].score = initial_altruism(
                rho, census.n_active / census.n_total, rho, recent_dropout_rate, rng, p
            )
            roster[i].state.status = ACTIVE
            ev.births.append(i)

    b, d, r = len(ev.births), len(ev.dropouts), len(ev.returns)
    new = PopulationCensus(
        n_active=census.n_active + b - d + r,
        n_never=census.n_never - b,
        n_dropout=census.n_dropout + d - r,
        n_total=census.n_total,
    )
    new.check()
    if PopulationCensus.from_roster(roster) != new:
        raise ConsistencyError("census update diverged from roster")
    return ev, new
