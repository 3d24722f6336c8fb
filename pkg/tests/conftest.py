import os

import numpy as np
import pytest

from src.scripts.modulation import make_periodic
from src.scripts.montecarlo import run


@pytest.fixture(autouse=True)
def clean_mzi_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith('MZI_'):
            monkeypatch.delenv(key)


@pytest.fixture
def phase_grid():
    return np.linspace(0.0, 2 * np.pi, 21)


@pytest.fixture
def half_duty_schedule():
    return make_periodic(0.5, 1.0, 1.0)


@pytest.fixture
def half_duty_run(half_duty_schedule, phase_grid):
    """Seeded duty-0.5 run, 20000 events per phase point."""
    return run(half_duty_schedule, phase_grid, 20_000, seed=42)
