import numpy as np
import pytest

from flynet.rng import Rng, derive_seed, splitmix64, splitmix64_array


def test_splitmix64_reference_vector():
    # first output of the reference splitmix64 stream seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_counter_stream_matches_scalar_splitmix():
    key = 0x1234_5678_9ABC_DEF0
    arr = splitmix64_array(key, 5)
    expected = [splitmix64((key + i * 0x9E3779B97F4A7C15) & (2**64 - 1)) for i in range(5)]
    assert [int(v) for v in arr] == expected


def test_same_seed_same_stream():
    a, b = Rng(99), Rng(99)
    assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]
    assert Rng(1).next_u64() != Rng(2).next_u64()


def test_derive_seed_depends_on_keys():
    assert derive_seed(5, 0) != derive_seed(5, 1)
    assert derive_seed(5, 0) == derive_seed(5, 0)


def test_sample_distinct_and_in_range():
    r = Rng(3)
    for k in (0, 1, 17, 100):
        s = r.sample(100, k)
        assert len(set(s)) == k
        assert all(0 <= v < 100 for v in s)
    with pytest.raises(ValueError):
        r.sample(5, 6)


def test_randint_covers_closed_range():
    r = Rng(4)
    seen = {r.randint(-2, 2) for _ in range(500)}
    assert seen == {-2, -1, 0, 1, 2}


def test_uniform_arrays_in_unit_interval():
    u = Rng(5).uniform_array((1000,))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.05


def test_normal_array_moments():
    z = Rng(6).normal_array((20000,))
    assert abs(z.mean()) < 0.05
    assert abs(z.std() - 1.0) < 0.05
