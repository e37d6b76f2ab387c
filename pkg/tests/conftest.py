"""Shared fixtures: small manufactured grids and cached scenario solves."""

import numpy as np
import pytest

from phaseident.dataset import Grid2D
from phaseident.numdiff import DenoiseSpec, build_derivative_stack
from phaseident.simulate import build, find_scenario


def manufactured_grid(nx=201, nt=101, x_min=0.0, x_max=2 * np.pi,
                      t_max=1.0, decay=1.0):
    """u = sin(x) exp(-decay t): satisfies u_t = -decay u exactly."""
    x = np.linspace(x_min, x_max, nx)
    t = np.linspace(0.0, t_max, nt)
    values = np.sin(x)[:, None] * np.exp(-decay * t)[None, :]
    return Grid2D(x_min, x_max, t_max, nx, nt, values)


@pytest.fixture(scope="session")
def decay_grid():
    return manufactured_grid()


@pytest.fixture(scope="session")
def decay_stack(decay_grid):
    return build_derivative_stack(decay_grid)


@pytest.fixture(scope="session")
def kdvb_clean():
    """Clean two-phase KdV -> transport grid (expensive, solved once)."""
    return build(find_scenario("kdv-b"))


@pytest.fixture(scope="session")
def tvb_clean():
    return build(find_scenario("t-vb"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
