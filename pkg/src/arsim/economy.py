"""Altruism points: what drivers earn, what riders pay, and clamping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InputError


@dataclass(frozen=True)
class EconomyParams:
    alpha_s: float = 0.1  # driver scaling
    beta_s: float = 1.0  # rider scaling

    def __post_init__(self):
        for name in ("alpha_s", "beta_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be finite and positive, got {v}")


def driver_gain(s_rider, detour_km, max_detour, p: EconomyParams = EconomyParams()):
    """Points a driver earns for carrying a rider with score ``s_rider``.

    The value doubles as the match's point value ``p_{i,j}``.
    """
    if not max_detour > 0:
        raise ContractViolation("max_detour must be positive")
    if detour_km > max_detour + 1e-9:
        raise ContractViolation(f"detour {detour_km} exceeds grid diameter {max_detour}")
    if detour_km < -1e-9:
        raise ContractViolation(f"negative detour {detour_km}")
    frac = min(max(detour_km, 0.0), max_detour) / max_detour
    return p.alpha_s * s_rider * (1.0 - frac)


def rider_cost(delta_driver, p: EconomyParams = EconomyParams()):
    if delta_driver < 0:
        raise ContractViolation("driver gain must be nonnegative")
    return -p.beta_s * delta_driver


def apply_update(s, delta):
    return max(0.0, min(1.0, s + delta))


def driver_gain_array(s_rider, detour_km, max_detour, p: EconomyParams = EconomyParams()):
    """Vectorized :func:`driver_gain` with the same contract checks."""
    s_rider = np.asarray(s_rider, dtype=float)
    detour_km = np.asarray(detour_km, dtype=float)
    if not max_detour > 0:
        raise ContractViolation("max_detour must be positive")
    if np.any(detour_km > max_detour + 1e-9) or np.any(detour_km < -1e-9):
        raise ContractViolation("detour outside [0, max_detour]")
    frac = np.clip(detour_km, 0.0, max_detour) / max_detour
    return p.alpha_s * s_rider * (1.0 - frac)


def apply_update_array(s, delta):
    """Vectorized :func:`apply_update`."""
    return np.clip(np.asarray(s, dtype=float) + delta, 0.0, 1.0)


class ScoreLedger:
    """Accumulates per-agent deltas over a day and applies them at day end.

    ``raw_total`` tracks the unclamped sum so conservation can be audited.
    """

    def __init__(self):
        self.deltas: dict = {}
        self.matches: list = []

    def record_match(self, driver_id, rider_id, s_rider, detour_km, max_detour, p: EconomyParams):
        gain = driver_gain(s_rider, detour_km, max_detour, p)
        cost = rider_cost(gain, p)
        self.deltas[driver_id] = self.deltas.get(driver_id, 0.0) + gain
        self.deltas[rider_id] = self.deltas.get(rider_id, 0.0) + cost
        self.matches.append((driver_id, rider_id, gain))
        return gain

    @property
    def raw_total(self):
        return sum(self.deltas.values())

    def apply(self, scores: dict):
        for aid, delta in sorted(self.deltas.items()):
            scores[aid] = apply_update(scores[aid], delta)
        self.deltas.clear()
        return scores
