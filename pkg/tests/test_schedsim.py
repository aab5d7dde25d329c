import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsmcpar import perf, schedsim
from dsmcpar.errors import ParameterError

BETA, P1, P = 0.437, 6, 36
PRI_STAR = perf.pri_star(BETA, 6)


def test_single_worker_runs_everything_in_series():
    prof = schedsim.RunProfile((((0.3, 0.7), (0.1, 0.2)),), 1, 1)
    out = schedsim.simulate(prof)
    assert out.makespan == pytest.approx(1.3, rel=1e-15)
    assert out.speedup == pytest.approx(1.0, rel=1e-15)


def test_profile_beta_is_exact():
    for seed in range(5):
        prof = schedsim.random_profile(BETA, 12, P1, P, 1.0, seed=seed)
        assert abs(prof.beta - BETA) < 1e-12
    assert abs(schedsim.even_profile(0.2, 3, 3, 9).beta - 0.2) < 1e-12


def test_profile_validation():
    with pytest.raises(ParameterError):
        schedsim.RunProfile((), 1, 1)
    with pytest.raises(ParameterError):
        schedsim.RunProfile((((1.0, 1.0),),), 3, 2)
    with pytest.raises(ParameterError):
        schedsim.RunProfile((((-1.0, 1.0),),), 1, 1)


@pytest.mark.parametrize("p2", [1, 2, 4, 6, 8])
def test_pri_zero_matches_model_exactly(p2):
    out = schedsim.simulate(schedsim.even_profile(BETA, 12, P1, P1 * p2, 0.0))
    assert out.contended == 0
    assert out.s_p2 == pytest.approx(perf.s_p2_with_pri(BETA, p2, 0.0), rel=1e-6)


@pytest.mark.parametrize("stagger", ["even", "random"])
def test_pri_zero_never_contends(stagger):
    build = schedsim.even_profile if stagger == "even" else schedsim.random_profile
    out = schedsim.simulate(build(BETA, 12, P1, P, 0.0))
    assert out.contended == 0
    assert out.s_p2 == pytest.approx(perf.s_p2_with_pri(BETA, 6, 0.0), rel=1e-6)


def test_uncontended_runs_match_model_with_integer_team():
    # zero contention: the simulated run time is exactly the model with the rounded team
    for pri in (0.5, 1.0, 2.0, 3.0):
        prof = schedsim.even_profile(BETA, 12, P1, P, pri)
        out = schedsim.simulate(prof)
        assert out.contended == 0
        team = prof.request + 1
        assert out.s_p2 == pytest.approx(1 / (BETA + (1 - BETA) / team), rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 4), st.integers(0, 8), st.floats(0, 5), st.integers(0, 99))
def test_work_is_conserved_and_heap_stays_consistent(beta, p1, extra, pri, seed):
    p = p1 + extra
    prof = schedsim.random_profile(beta, 2 * p1 + 1, p1, p, pri, cycles=5, seed=seed)
    out = schedsim.simulate(prof)
    assert out.busy_time == pytest.approx(out.total_work, rel=1e-12)
    schedsim.check_trace(out.heap_trace, p - p1)
    longest = max(sum(s for s, _ in r) + sum(w for _, w in r) / (p - p1 + 1) for r in prof.phases)
    assert out.makespan >= longest * (1 - 1e-12)


def test_sweep_single_point():
    rows = schedsim.sweep_pri(schedsim.even_profile(BETA, 12, P1, P), [0.0])
    assert len(rows) == 1
    assert rows[0]["simulated"] == pytest.approx(rows[0]["predicted"], rel=1e-6)
    with pytest.raises(ParameterError):
        schedsim.sweep_pri(schedsim.even_profile(BETA, 12, P1, P), [])


def even_curve(grid):
    return schedsim.sweep_pri(schedsim.even_profile(BETA, 12, P1, P), grid,
                              lambda pri: schedsim.even_profile(BETA, 12, P1, P, pri))


def random_curve(grid, seed):
    return schedsim.sweep_pri(schedsim.random_profile(BETA, 12, P1, P, seed=seed), grid,
                              lambda pri: schedsim.random_profile(BETA, 12, P1, P, pri, seed=seed))


def test_within_five_percent_of_model_up_to_threshold():
    grid = [PRI_STAR * i / 10 for i in range(11)]
    for row in even_curve(grid):
        assert abs(row["simulated"] / row["predicted"] - 1) < 0.05


@pytest.mark.parametrize("seed", range(5))
def test_overallocation_beyond_threshold_hurts(seed):
    at, beyond = random_curve([PRI_STAR, 2 * PRI_STAR], seed)
    assert beyond["simulated"] < at["simulated"]
    assert beyond["makespan"] >= at["makespan"]
    assert beyond["contended"] > at["contended"]


def test_rise_peak_decline_shape():
    grid = [2 * PRI_STAR * i / 16 for i in range(17)]
    for seed in range(3):
        s = [r["simulated"] for r in random_curve(grid, seed)]
        peak = max(range(len(s)), key=s.__getitem__)
        assert s[peak] > s[0] and s[peak] > s[-1]
        assert 0 < grid[peak] <= 1.5 * PRI_STAR


def test_compare_tlp_vs_tlpdpr_operating_point():
    (row,) = schedsim.compare_tlp_vs_tlpdpr(BETA, P1, [6])
    assert row["max"] == pytest.approx(1 / BETA)
    assert row["tlp"] / row["max"] == pytest.approx(0.823, abs=5e-4)
    assert row["tlpdpr"] / row["max"] >= 0.93
    assert row["sim_tlp"] == pytest.approx(row["tlp"], rel=1e-6)
    assert abs(row["sim_tlpdpr"] / row["tlpdpr"] - 1) < 0.05


def test_compare_grid_and_csv():
    rows = schedsim.compare_tlp_vs_tlpdpr(BETA, P1, [1, 2, 3])
    assert [r["p2"] for r in rows] == [1, 2, 3]
    assert rows[0]["tlp"] == pytest.approx(1.0) and rows[0]["pri_star"] == 0
    text = schedsim.rows_to_csv(rows, "beta=0.437")
    assert text.startswith("# beta=0.437\np2,tlp,tlpdpr")


def test_simulation_is_deterministic():
    a = schedsim.simulate(schedsim.random_profile(BETA, 12, P1, P, 2.0, seed=4))
    b = schedsim.simulate(schedsim.random_profile(BETA, 12, P1, P, 2.0, seed=4))
    assert a.makespan == b.makespan and a.timelines == b.timelines
    assert math.isfinite(a.speedup)
