import numpy as np
import pytest

from romscale.data_model import PERIODIC, WALL, Grid, SnapshotSet, VelocityField
from romscale.testbed import make_testbed


@pytest.fixture(scope="session")
def testbed():
    """Canonical Burgers testbed: (config, snapshots, POD basis)."""
    return make_testbed()


@pytest.fixture(scope="session")
def testbed_cfg(testbed):
    return testbed[0]


@pytest.fixture(scope="session")
def testbed_snapshots(testbed):
    return testbed[1]


@pytest.fixture(scope="session")
def testbed_basis(testbed):
    return testbed[2]


@pytest.fixture
def grid_1d():
    return Grid((64,), (1.0 / 64,), (PERIODIC,))


@pytest.fixture
def grid_3d():
    return Grid((8, 5, 6), (0.5, 0.25, 0.4), (PERIODIC, WALL, PERIODIC))


def make_sine_snapshots(grid, n_snapshots=8, seed=0):
    """Small analytic snapshot set on a 1D periodic grid."""
    rng = np.random.default_rng(seed)
    x = grid.axis_coordinates(0)
    length = grid.lengths[0]
    snaps = []
    for _ in range(n_snapshots):
        c = rng.normal(size=3)
        u = (1.0 + c[0] * np.sin(2 * np.pi * x / length)
             + c[1] * np.cos(4 * np.pi * x / length)
             + c[2] * np.sin(6 * np.pi * x / length))
        snaps.append(VelocityField(grid, (u,)))
    times = np.arange(n_snapshots, dtype=np.float64)
    return SnapshotSet(grid, times, tuple(snaps))


@pytest.fixture
def sine_snapshots(grid_1d):
    return make_sine_snapshots(grid_1d)
