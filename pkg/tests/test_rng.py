"""Counter-based stream correctness: determinism, uniformity, independence."""

import numpy as np
import pytest
from scipy import stats

from scpp.rng import Stream, counter_uniforms, derive_key, derive_keys, mix64


def test_mix64_is_deterministic_and_64bit():
    assert mix64(0x12345) == mix64(0x12345)
    assert 0 <= mix64(2**64 - 1) < 2**64
    assert mix64(1) != mix64(2)


def test_derive_keys_matches_scalar_chain():
    base = derive_key(42, 7)
    vec = derive_keys(base, 100)
    for j in (0, 1, 17, 99):
        assert int(vec[j]) == derive_key(42, 7, j)


def test_order_of_indices_matters():
    assert derive_key(1, 2, 3) != derive_key(1, 3, 2)
    assert derive_key(0, 1) != derive_key(1, 0)


def test_stream_sequential_equals_counter_mode():
    s = Stream(987654321)
    a = s.random(10)
    b = s.random(5)
    direct = counter_uniforms(np.uint64(987654321),
                              np.arange(15, dtype=np.uint64))
    assert np.array_equal(np.concatenate([a, b]), direct)


def test_uniformity_ks():
    u = Stream(derive_key(2024, 1)).random(100_000)
    assert 0.0 < u.min() and u.max() < 1.0
    d = stats.kstest(u, "uniform").statistic
    assert d < 1.95 / np.sqrt(u.size)  # level-0.001 critical value


def test_exponential_moments():
    g = Stream(derive_key(2024, 2)).exponential(0.5, 200_000)
    assert abs(g.mean() - 0.5) < 4 * 0.5 / np.sqrt(g.size)
    d = stats.kstest(g, "expon", args=(0, 0.5)).statistic
    assert d < 1.95 / np.sqrt(g.size)


def test_normal_moments_and_ks():
    z = Stream(derive_key(2024, 3)).normal(100_000)
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 4 * np.sqrt(2.0 / z.size)
    assert stats.kstest(z, "norm").statistic < 1.95 / np.sqrt(z.size)


def test_poisson_draws_match_scipy_distribution():
    s = Stream(derive_key(2024, 4))
    draws = np.array([s.poisson(3.0) for _ in range(20_000)])
    assert abs(draws.mean() - 3.0) < 4 * np.sqrt(3.0 / draws.size)
    assert abs(draws.var() - 3.0) < 5 * np.sqrt(1.0 / draws.size) * 3.0


def test_distinct_streams_uncorrelated():
    keys = derive_keys(derive_key(99), 2000)
    a = counter_uniforms(keys, np.uint64(0))
    b = counter_uniforms(keys, np.uint64(1))
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 4 / np.sqrt(a.size)


@pytest.mark.parametrize("tag", [0, 1, 77])
def test_fork_gives_fresh_independent_stream(tag):
    s = Stream(123)
    child = s.fork(tag)
    assert child.key != s.key
    assert child.key == Stream(123).fork(tag).key
