import math

import pytest

from vsg_doa.doa import estimate_doa
from vsg_doa.equilibrium import VpccMode, operating_pair
from vsg_doa.model import GridParams, paper_grid, paper_vsg


@pytest.fixture(scope="session")
def vsg():
    return paper_vsg()


@pytest.fixture(scope="session")
def grid():
    return paper_grid()


@pytest.fixture(scope="session")
def pair(vsg, grid):
    return operating_pair(vsg, grid, mode=VpccMode.DROOP)


@pytest.fixture(scope="session")
def boundary(vsg, grid):
    return estimate_doa(vsg, grid)


@pytest.fixture
def lossless_grid():
    return GridParams(vg=311.0, rg=0.0, xg=0.9425)


def _xy(s):
    return (s.delta, s.domega) if hasattr(s, "delta") else tuple(s)


def scaled_dist(a, b):
    a, b = _xy(a), _xy(b)
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]) / 100.0)


TWO_PI = 2.0 * math.pi
