import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from dsmcpar import rng
from dsmcpar.errors import ParameterError
from dsmcpar.kernels import BACKENDS

u64 = st.integers(0, 2**64 - 1)


def test_same_seed_and_run_replays_first_million_draws():
    a = rng.stream_for_run(42, 3).uniform(10**6)
    b = rng.stream_for_run(42, 3).uniform(10**6)
    assert np.array_equal(a, b)


def test_neighbouring_runs_are_uncorrelated():
    a = rng.stream_for_run(42, 0).uniform(10**6)
    b = rng.stream_for_run(42, 1).uniform(10**6)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    assert not np.array_equal(a[:10], b[:10])


@pytest.mark.parametrize("seed,run", [(0, 0), (1, 7), (2**40, 123)])
def test_uniform_chi_square(seed, run):
    u = rng.stream_for_run(seed, run).uniform(10**5)
    assert u.min() >= 0.0 and u.max() < 1.0
    counts = np.bincount((u * 100).astype(int), minlength=100)
    assert stats.chisquare(counts).pvalue > 0.001


def test_stream_counter_advances_and_concatenates():
    s = rng.stream_for_run(5, 5)
    whole = s.copy().uniform(30)
    parts = np.concatenate([s.uniform(10), s.uniform(20)])
    assert np.array_equal(whole, parts)
    assert s.counter == 30


def test_run_id_must_be_non_negative():
    with pytest.raises(ParameterError):
        rng.stream_for_run(0, -1)


def test_substream_replays():
    s = rng.stream_for_run(9, 2)
    assert np.array_equal(rng.substream(s, 17, 4).uniform(100), rng.substream(s, 17, 4).uniform(100))


def test_sibling_substreams_differ_over_a_thousand_cells():
    s = rng.stream_for_run(9, 2)
    first = [rng.substream(s, c, 0).uniform() for c in range(1000)]
    assert len(set(first)) == 1000
    assert rng.substream(s, 0, 0).uniform() != rng.substream(s, 0, 1).uniform()
    assert rng.substream(s, 0, 0, rng.COLLISION).uniform() != rng.substream(s, 0, 0, rng.MOTION).uniform()


def test_pooled_sibling_substreams_uniform():
    s = rng.stream_for_run(3, 0)
    pooled = np.concatenate([rng.substream(s, c, 11).uniform(100) for c in range(1000)])
    counts = np.bincount((pooled * 50).astype(int), minlength=50)
    assert stats.chisquare(counts).pvalue > 0.001


def test_maxwellian_moments_zero_drift():
    N, T = 10**6, 1.0
    v = rng.sample_maxwellian(rng.stream_for_run(1, 0), T, (0, 0, 0), N // 3 + 1).ravel()[:N]
    assert abs(v.mean()) < 3 * np.sqrt(T / N)
    # var of the sample variance of a normal is 2 T^2 / (N - 1)
    assert abs(v.var(ddof=1) - T) < 3 * np.sqrt(2 * T * T / (N - 1))


def test_maxwellian_variance_scales_with_temperature():
    N, T = 300000, 2.5
    v = rng.sample_maxwellian(rng.stream_for_run(4, 0), T, (0, 0, 0), N)
    for a in range(3):
        assert abs(v[:, a].var(ddof=1) - T) < 3 * np.sqrt(2 * T * T / (N - 1))


def test_maxwellian_drift_translates_mean():
    N = 10**5
    v = rng.sample_maxwellian(rng.stream_for_run(2, 0), 1.0, (5.0, 0.0, 0.0), N)
    assert abs(v[:, 0].mean() - 5.0) < 3 / np.sqrt(N)
    assert abs(v[:, 1].mean()) < 3 / np.sqrt(N)


def test_single_vector_and_bad_temperature():
    s = rng.stream_for_run(0, 0)
    assert rng.sample_maxwellian(s, 1.0).shape == (3,)
    assert isinstance(rng.sample_uniform(s), float)
    with pytest.raises(ParameterError):
        rng.sample_maxwellian(s, 0.0)
    with pytest.raises(ParameterError):
        rng.RngStream(1).maxwellian(5, -1.0)


@given(u64, u64)
def test_vectorised_hashes_match_scalar(key, value):
    assert int(rng.derive_many(np.uint64(key), np.uint64(value))) == rng.derive(key, value)
    u = float(rng.uniform_at(np.uint64(key), np.uint64(value % 2**63)))
    assert u == (rng.draw64(key, value % 2**63) >> 11) * 2.0**-53


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")
@given(u64, st.integers(0, 2**62))
def test_compiled_uniform_matches_numpy(key, counter):
    c = BACKENDS["cython"]
    k = np.array([key, key ^ 1], np.uint64)
    n = np.array([counter, counter + 1], np.uint64)
    assert np.array_equal(c.uniform_at(k, n), rng.uniform_at(k, n))
