import numpy as np
import pytest

from dsmcpar import config, gas, kernels
from dsmcpar.grid import DIFFUSE, SPECULAR, Body, CellGrid, Geometry

pytestmark = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled backend not built")
PY, CY = kernels.BACKENDS["python"], kernels.BACKENDS.get("cython")


def test_default_backend_and_override(monkeypatch):
    assert kernels.get_backend("python") is PY
    monkeypatch.setenv("DSMCPAR_BACKEND", "python")
    assert kernels.get_backend() is PY
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_index_identical(rs):
    g = CellGrid((0.0, 0.0), (3.0, 2.0), (6, 4))
    pos = rs.uniform(0, 1, (5000, 2)) * [3.0, 2.0]
    s = gas.ParticleStore(2)
    s.append(pos, np.zeros((5000, 3)))
    a, b = gas.enumerate_and_index(s, g, PY), gas.enumerate_and_index(s, g, CY)
    assert np.array_equal(a.starts, b.starts) and np.array_equal(a.perm, b.perm)


def test_motion_identical_with_body_and_diffuse_walls(rs):
    g = CellGrid((0.0, 0.0), (3.0, 2.0), (6, 4))
    geo = Geometry(g, (DIFFUSE, SPECULAR, DIFFUSE, SPECULAR), (1.5, 1.0, 0.7, 1.0),
                   Body((1.0, 0.5), (1.5, 1.5), DIFFUSE, 2.0))
    N = 4000
    pos = rs.uniform(0, 1, (N, 2)) * [3.0, 2.0]
    pos = pos[~geo.body.contains(pos)]
    vel = rs.normal(size=(len(pos), 3)) * 3
    stores = []
    for be in (PY, CY):
        s = gas.ParticleStore(2)
        s.append(pos, vel)
        gas.move_particles(s, geo, 0.3, key_base=12345, backend=be)
        stores.append(s)
    assert np.allclose(stores[0].live_pos(), stores[1].live_pos(), rtol=1e-12, atol=1e-12)
    assert np.allclose(stores[0].live_vel(), stores[1].live_vel(), rtol=1e-12, atol=1e-12)


def test_collisions_agree_to_rounding(rs):
    g = CellGrid((0.0,), (10.0,), (10,))
    s0 = gas.ParticleStore(1)
    s0.append(rs.uniform(0, 10, (600, 1)), rs.normal(size=(600, 3)))
    out = []
    for be in (PY, CY):
        s = s0.copy()
        idx = gas.enumerate_and_index(s, g, be)
        crmax = np.full(10, 5.0)
        n = gas.collide_cells(s, idx, crmax, np.ones(10), gas.CollisionParams(0.05), 0.1, 777, backend=be)
        out.append((n, s.live_vel().copy(), crmax))
    assert out[0][0] == out[1][0] > 0
    assert np.allclose(out[0][1], out[1][1], rtol=1e-12, atol=1e-12)
    assert np.allclose(out[0][2], out[1][2], rtol=1e-12)


def test_sampling_identical(rs):
    prob = config.load_problem("box")
    st = gas.KernelState(prob, 0, 1)
    idx = gas.enumerate_and_index(st.store, prob.grid)
    a = gas.sample(idx, st.store, gas.CellAccumulator.zeros(prob.grid.n_cells), backend=PY)
    b = gas.sample(idx, st.store, gas.CellAccumulator.zeros(prob.grid.n_cells), backend=CY)
    assert np.array_equal(a.sum_n, b.sum_n)
    assert np.allclose(a.sum_v, b.sum_v, rtol=1e-13) and np.allclose(a.sum_v2, b.sum_v2, rtol=1e-13)


@pytest.mark.parametrize("name", ["expansion", "body"])
def test_whole_runs_statistically_alike(name):
    prob = config.load_problem(name)
    a = gas.run_unsteady(prob, 0, 1, backend=PY)
    b = gas.run_unsteady(prob, 0, 1, backend=CY)
    assert a.times == b.times
    na, nb = a.particle_count_history[-1], b.particle_count_history[-1]
    assert abs(na - nb) <= 0.05 * max(na, nb) + 5
