import numpy as np
import pytest

from dsmcpar import gas
from dsmcpar.grid import OPEN, SPECULAR, CellGrid, Geometry
from dsmcpar.kernels import BACKENDS


def small_box(n=400.0, T=1.0, d=0.05, counts=(4, 4), clock=(0.02, 0.1, 0.4), drift=(0.0, 0.0, 0.0)):
    g = CellGrid((0.0, 0.0), (1.0, 1.0), counts)
    return gas.FlowProblem(Geometry(g), gas.SimulationClock(*clock), gas.CollisionParams(d),
                           initial_fill=gas.GasState(n, T, drift), name="small_box")


def open_channel():
    g = CellGrid((0.0, 0.0), (2.0, 1.0), (8, 4))
    geo = Geometry(g, (OPEN, OPEN, SPECULAR, SPECULAR))
    return gas.FlowProblem(geo, gas.SimulationClock(0.02, 0.1, 0.4), gas.CollisionParams(0.05),
                           inflow=(gas.Inflow(0, 200.0, 1.0, (1.5, 0.0, 0.0)),), name="channel")


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def rs():
    return np.random.default_rng(12345)
