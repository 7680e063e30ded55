"""Shared fixtures: seeded generators, reference mixtures and quadrature grids."""
from pathlib import Path

import numpy as np
import pytest

from models import directional_reference, dirlin_reference, linear_reference
from sphere import build_line_grid, build_sphere_grid, line_window

MIXTURES = Path(__file__).resolve().parent.parent / "mixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def mixtures_dir() -> Path:
    return MIXTURES


@pytest.fixture(scope="session")
def circle_mixture():
    return directional_reference(1)


@pytest.fixture(scope="session")
def sphere_mixture():
    return directional_reference(2)


@pytest.fixture(scope="session")
def cylinder_mixture():
    return dirlin_reference(1)


@pytest.fixture(scope="session")
def normal_mixture():
    return linear_reference()


@pytest.fixture(scope="session")
def circle_grid():
    return build_sphere_grid(1, 128)


@pytest.fixture(scope="session")
def sphere_grid():
    return build_sphere_grid(2, 64)


@pytest.fixture(scope="session")
def cylinder_line_grid(cylinder_mixture):
    center, half = line_window(cylinder_mixture.means, cylinder_mixture.sigmas, 1.0)
    return build_line_grid(half, 256, center)
