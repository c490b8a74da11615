"""Shared fixtures and the acceptance summary printed at the end of a run."""

from pathlib import Path

import numpy as np
import pytest

from arsim.grid import CellCoord, GridWorld, TripSpec

DATA = Path(__file__).parent / "data"

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def trip(ox, oy, dx, dy):
    return TripSpec(CellCoord(ox, oy), CellCoord(dx, dy))


@pytest.fixture
def grid15():
    return GridWorld(15, 15, 0.28)


@pytest.fixture
def grid5():
    return GridWorld(5, 5, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
