"""
Shared pytest fixtures
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from resonance_lab.spectral import Grid  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test is reproducible"""
    return np.random.default_rng(12345)


@pytest.fixture
def grid_1d() -> Grid:
    return Grid(dim=1, n_per_axis=128, box_length=64.0)


@pytest.fixture
def grid_2d() -> Grid:
    return Grid(dim=2, n_per_axis=32, box_length=32.0)
