from pathlib import Path

import numpy as np
import pytest

from shared.numerics.fock import ModeSet
from shared.numerics.model import SpatialGrid, named_potential

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_modes():
    return ModeSet.discrete([1.0, 2.0], [0.3, 0.2], [1.0, 1.5])


@pytest.fixture
def box_grid():
    """[-pi/2, pi/2] with Dirichlet walls."""
    return SpatialGrid(1, np.pi / 2, 16)


@pytest.fixture
def box_particles(box_grid):
    return named_potential(box_grid, 1, "zero")


@pytest.fixture
def configs_dir():
    return CONFIGS
