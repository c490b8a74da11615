import math

import pytest

from arsim.economy import EconomyParams, ScoreLedger, apply_update, driver_gain, rider_cost
from arsim.errors import ContractViolation, InputError


def test_driver_gain_examples():
    p = EconomyParams(alpha_s=0.1)
    assert driver_gain(0.7, 8.0, 8.0, p) == 0.0
    assert driver_gain(0.7, 0.0, 8.0, p) == pytest.approx(0.07)
    assert driver_gain(0.5, 2.0, 8.0, p) == pytest.approx(0.0375, abs=1e-15)


def test_driver_gain_contract():
    with pytest.raises(ContractViolation):
        driver_gain(0.5, 9.0, 8.0)
    with pytest.raises(ContractViolation):
        driver_gain(0.5, 1.0, 0.0)
    with pytest.raises(ContractViolation):
        driver_gain(0.5, -1.0, 8.0)


def test_rider_cost_examples():
    assert rider_cost(0.0) == 0.0
    assert rider_cost(0.0375, EconomyParams(beta_s=1.0)) == pytest.approx(-0.0375)
    assert rider_cost(0.2, EconomyParams(beta_s=0.5)) <= 0


def test_apply_update_examples():
    assert apply_update(0.9, 0.3) == 1.0
    assert apply_update(0.1, -0.3) == 0.0
    assert apply_update(0.5, 0.0375) == pytest.approx(0.5375)


def test_params_validated():
    with pytest.raises(InputError):
        EconomyParams(alpha_s=0.0)
    with pytest.raises(InputError):
        EconomyParams(beta_s=math.inf)


def test_ledger_conserves_before_clamp():
    ledger = ScoreLedger()
    p = EconomyParams()
    ledger.record_match(1, 2, 0.8, 1.0, 8.0, p)
    ledger.record_match(3, 4, 0.3, 0.0, 8.0, p)
    assert ledger.raw_total == pytest.approx(0.0, abs=1e-15)
    scores = ledger.apply({1: 0.99, 2: 0.01, 3: 0.5, 4: 0.5})
    assert scores[1] == 1.0 and scores[2] == 0.0
    assert scores[3] == pytest.approx(0.53)


def test_ledger_total_with_partial_rider_cost():
    ledger = ScoreLedger()
    p = EconomyParams(alpha_s=0.1, beta_s=0.5)
    gain = ledger.record_match(1, 2, 0.6, 2.0, 8.0, p)
    assert ledger.raw_total == pytest.approx(gain * (1 - 0.5))
