import numpy as np
import pytest

from dynbc.grid import HalfSpaceGrid, InitialData


@pytest.fixture(scope="session")
def grid():
    """Default desk-scale grid."""
    return HalfSpaceGrid(12.0, 6.0, 129, 65)


@pytest.fixture(scope="session")
def small_grid():
    return HalfSpaceGrid(8.0, 4.0, 65, 33)


@pytest.fixture(scope="session")
def default_data():
    """Constant interior data with heavy-tailed boundary data (incompatible)."""
    return InitialData(
        lambda xp, xn: np.ones_like(np.asarray(xp, dtype=float)),
        lambda xp: 1.0 / (1.0 + np.asarray(xp, dtype=float) ** 2),
        phi_far=1.0,
    )


@pytest.fixture(scope="session")
def gaussian_data():
    return InitialData(
        lambda xp, xn: np.exp(-(np.asarray(xp, dtype=float) ** 2 + xn * xn)),
        lambda xp: 1.0 / (1.0 + np.asarray(xp, dtype=float) ** 2),
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(611)
