import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flynet.dataset import Traverse
from flynet.encoder import (BinaryDescriptor, ConfigError, EncoderConfig, ProjectionMatrix,
                            build_projection, encode, encode_batch, encode_traverse,
                            hamming_similarity, hamming_similarity_matrix, project,
                            read_descriptors, write_descriptors)

DEFAULT = EncoderConfig()


def brute_encode(rows, x, k):
    """Reference: explicit sums, then pick winners one at a time by (value desc, index asc)."""
    y = [sum(x[i] for i in row) for row in rows]
    remaining = list(range(len(y)))
    winners = []
    for _ in range(k):
        best = min(remaining, key=lambda j: (-y[j], j))
        winners.append(best)
        remaining.remove(best)
    return [1 if j in winners else 0 for j in range(len(y))], y


class TestConfig:
    def test_fan_in_default(self):
        assert DEFAULT.fan_in == 205
        assert DEFAULT.k == 32

    def test_fan_in_floor(self):
        cfg = EncoderConfig(m=10, n=4, sampling_ratio=0.1)
        W = build_projection(cfg)
        assert cfg.fan_in == 1
        assert W.rows.min() >= 0 and W.rows.max() < 10

    @pytest.mark.parametrize("kwargs", [dict(m=0), dict(sampling_ratio=0.0), dict(sampling_ratio=1.5),
                                        dict(wta_fraction=0.0), dict(wta_fraction=1.0),
                                        dict(n=4, wta_fraction=0.01)])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            EncoderConfig(**kwargs)


class TestProjection:
    def test_deterministic_and_seed_dependent(self):
        a, b = build_projection(DEFAULT), build_projection(DEFAULT)
        assert np.array_equal(a.rows, b.rows)
        assert not np.array_equal(a.rows, build_projection(EncoderConfig(seed=1)).rows)

    def test_rows_without_replacement(self):
        W = build_projection(DEFAULT)
        assert W.rows.shape == (64, 205)
        for row in W.rows:
            assert len(set(row.tolist())) == 205

    def test_row_depends_only_on_seed_and_index(self):
        small = build_projection(EncoderConfig(n=8, seed=3))
        big = build_projection(EncoderConfig(n=64, seed=3))
        assert np.array_equal(small.rows, big.rows[:8])

    def test_dense_has_fan_in_ones_per_row(self):
        assert np.all(build_projection(DEFAULT).dense().sum(axis=1) == 205)


class TestEncode:
    def test_worked_example(self):
        # this seed happens to draw rows {3},{1},{6},{0}
        cfg = EncoderConfig(m=8, n=4, sampling_ratio=0.1, seed=4815)
        W = build_projection(cfg)
        assert W.rows[:, 0].tolist() == [3, 1, 6, 0]
        x = np.array([0.9, 0.1, 0, 0.5, 0, 0, 0.7, 0])
        np.testing.assert_allclose(project(W, x), [0.5, 0.1, 0.7, 0.9])
        assert encode(W, x, cfg).bits.tolist() == [0, 0, 1, 1]

    def test_matches_brute_force(self, rng):
        cfg = EncoderConfig(m=50, n=12, sampling_ratio=0.2, wta_fraction=0.25, seed=9)
        W = build_projection(cfg)
        for _ in range(20):
            # coarse values create plenty of ties
            x = rng.integers(0, 3, 50).astype(float)
            bits, _ = brute_encode(W.rows.tolist(), x.tolist(), cfg.k)
            assert encode(W, x, cfg).bits.tolist() == bits

    def test_zero_input_picks_first_indices(self):
        W = build_projection(DEFAULT)
        bits = encode(W, np.zeros(2048), DEFAULT).bits
        assert bits[:32].all() and not bits[32:].any()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            encode(build_projection(DEFAULT), np.zeros(100), DEFAULT)

    def test_batch_matches_single(self, random_frames):
        W = build_projection(DEFAULT)
        X = random_frames(10)
        batch = encode_batch(W, X, DEFAULT)
        for x, row in zip(X, batch):
            assert np.array_equal(encode(W, x, DEFAULT).bits, row)

    def test_traverse(self, random_frames):
        W = build_projection(DEFAULT)
        X = random_frames(6)
        codes = encode_traverse(W, Traverse(X, np.arange(6)), DEFAULT)
        perm = [3, 0, 5, 1, 4, 2]
        permuted = encode_traverse(W, Traverse(X[perm], np.arange(6)), DEFAULT)
        assert [codes[p] for p in perm] == permuted
        assert encode_traverse(W, Traverse(np.empty((0, 2048)), []), DEFAULT) == []


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=64, max_size=64),
       st.sampled_from([0.05, 0.25, 0.5, 0.75]))
def test_popcount_equals_k(values, frac):
    cfg = EncoderConfig(m=64, n=16, sampling_ratio=0.3, wta_fraction=frac, seed=2)
    W = build_projection(cfg)
    assert encode(W, np.array(values), cfg).popcount() == cfg.k


class TestHamming:
    def test_identity_and_complement(self, rng):
        bits = np.zeros(64, dtype=np.uint8)
        bits[rng.permutation(64)[:32]] = 1
        a = BinaryDescriptor(bits)
        assert hamming_similarity(a, a) == 1.0
        assert hamming_similarity(a, BinaryDescriptor(1 - bits)) == 0.0

    def test_arithmetic(self):
        a = BinaryDescriptor(np.array([1, 1, 0, 0, 1, 1, 0, 0], dtype=np.uint8))
        b = BinaryDescriptor(np.array([1, 1, 0, 0, 0, 0, 1, 1], dtype=np.uint8))
        assert hamming_similarity(a, b) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hamming_similarity(BinaryDescriptor(np.zeros(4, np.uint8)), BinaryDescriptor(np.zeros(8, np.uint8)))

    def test_matrix_agrees_with_pairwise(self, rng):
        A = rng.integers(0, 2, (5, 16)).astype(np.uint8)
        B = rng.integers(0, 2, (4, 16)).astype(np.uint8)
        S = hamming_similarity_matrix(A, B)
        for i in range(5):
            for j in range(4):
                assert S[i, j] == hamming_similarity(BinaryDescriptor(A[i]), BinaryDescriptor(B[j]))


class TestFnad:
    def test_roundtrip(self, tmp_path, random_frames):
        W = build_projection(DEFAULT)
        bits = encode_batch(W, random_frames(7), DEFAULT)
        write_descriptors(tmp_path / "d.fnad", bits, 2048, 123)
        back, m, seed = read_descriptors(tmp_path / "d.fnad")
        assert np.array_equal(back, bits) and m == 2048 and seed == 123

    def test_layout(self, tmp_path):
        bits = np.zeros((1, 16), dtype=np.uint8)
        bits[0, [0, 9]] = 1
        write_descriptors(tmp_path / "d.fnad", bits, 8, 0)
        data = (tmp_path / "d.fnad").read_bytes()
        assert data[:4] == b"FNAD" and len(data) == 28 + 2
        # bit j of byte j // 8 is output unit j
        assert data[28:] == bytes([0b00000001, 0b00000010])

    def test_packed_descriptor(self):
        d = BinaryDescriptor(np.array([1, 0, 0, 0, 0, 0, 0, 0, 0, 1], dtype=np.uint8))
        assert d.packed() == bytes([1, 2])
        assert BinaryDescriptor.from_packed(d.packed(), 10) == d

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"NOPE" + bytes(24))
        with pytest.raises(ValueError):
            read_descriptors(tmp_path / "x")


def test_projection_matrix_is_plain_data():
    W = ProjectionMatrix(np.array([[0], [1]]), 2, 0)
    assert W.n == 2 and W.fan_in == 1
