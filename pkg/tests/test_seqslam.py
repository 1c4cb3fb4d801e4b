import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flynet.classifier import TrainConfig, fit, forward_batch
from flynet.dataset import SynthConfig, generate_synthetic
from flynet.encoder import EncoderConfig, build_projection, encode_batch
from flynet.seqslam import (DifferenceMatrix, SeqSlamConfig, Source, contrast_enhance,
                            difference_matrix, match, read_matrix, write_matrix)


def brute_enhance(col, window):
    out = []
    for i in range(len(col)):
        start = i - window // 2
        vals = col[max(0, start):min(len(col), start + window)]
        mu = sum(vals) / len(vals)
        sd = math.sqrt(sum((v - mu) ** 2 for v in vals) / len(vals))
        out.append((col[i] - mu) / (sd + 1e-12))
    return out


def brute_match(D, ds, velocities):
    """Exhaustive (r, v) scoring with explicit loops."""
    R, Q = len(D), len(D[0])
    best = []
    for q in range(ds - 1, Q):
        scores = []
        for r in range(R):
            costs = []
            for v in velocities:
                total = 0.0
                for t in range(ds):
                    row = min(max(math.floor(r - v * t + 0.5), 0), R - 1)
                    total += D[row][q - t]
                costs.append(total)
            scores.append(min(costs))
        best.append(min(range(R), key=lambda r: (scores[r], r)))
    return best


class TestDifferenceMatrix:
    def test_one_hot_scores(self):
        S = np.zeros((2, 5))
        S[0, 3] = 1.0
        S[1] = 0.2
        D = difference_matrix(5, S, "scores")
        assert D.shape == (5, 2)
        assert D.d[:, 0].tolist() == [1, 1, 1, 0, 1]
        np.testing.assert_allclose(D.d[:, 1], 0.8)

    def test_hamming_zero_diagonal(self, rng):
        A = rng.integers(0, 2, (6, 16)).astype(np.uint8)
        D = difference_matrix(A, A, "hamming")
        assert np.all(np.diag(D.d) == 0)
        assert D.source is Source.HAMMING

    def test_hamming_3x3_brute_force(self):
        codes = [[1, 1, 0, 0, 1, 1, 0, 0], [1, 1, 0, 0, 0, 0, 1, 1], [0, 0, 0, 0, 1, 1, 1, 1]]
        D = difference_matrix(np.array(codes), np.array(codes), "hamming")
        for i in range(3):
            for j in range(3):
                dist = sum(a != b for a, b in zip(codes[i], codes[j]))
                assert D.d[i, j] == dist / 8

    def test_errors(self):
        with pytest.raises(ValueError):
            difference_matrix(3, np.empty((0, 3)), "scores")
        with pytest.raises(ValueError):
            difference_matrix(4, np.ones((2, 3)) / 3, "scores")
        with pytest.raises(ValueError):
            difference_matrix(np.array([[0.5, 0.2]]), np.array([[1.0, 0.0]]), "hamming")
        with pytest.raises(ValueError):
            difference_matrix(3, np.ones((1, 3)), "cosine")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_both_modes_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    S = rng.dirichlet(np.ones(7), size=4)
    bits = rng.integers(0, 2, (7, 12))
    for D in (difference_matrix(7, S, "scores"), difference_matrix(bits, bits[:4], "hamming")):
        assert np.all((D.d >= 0) & (D.d <= 1))


class TestContrastEnhance:
    def test_constant_matrix(self):
        out = contrast_enhance(DifferenceMatrix(np.full((12, 4), 0.37), Source.SCORES), 5)
        assert np.all(out.d == 0)

    def test_window_three_column(self):
        out = contrast_enhance(DifferenceMatrix(np.array([[0.0], [1.0], [0.0]]), Source.SCORES), 3)
        expected = brute_enhance([0.0, 1.0, 0.0], 3)
        np.testing.assert_allclose(out.d[:, 0], expected, atol=1e-9)
        np.testing.assert_allclose(expected, [-1.0, math.sqrt(2), -1.0], atol=1e-9)

    @pytest.mark.parametrize("window", [2, 3, 10, 25])
    def test_matches_brute_force(self, rng, window):
        d = rng.random((20, 3))
        out = contrast_enhance(DifferenceMatrix(d, Source.SCORES), window)
        for j in range(3):
            np.testing.assert_allclose(out.d[:, j], brute_enhance(d[:, j].tolist(), window), atol=1e-9)

    def test_column_offset_invariance(self, rng):
        d = rng.random((15, 4))
        shifted = d + np.array([0.0, 3.0, -1.5, 10.0])
        a = contrast_enhance(DifferenceMatrix(d, Source.SCORES), 6).d
        b = contrast_enhance(DifferenceMatrix(shifted, Source.SCORES), 6).d
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_window_too_small(self):
        with pytest.raises(ValueError):
            contrast_enhance(DifferenceMatrix(np.zeros((3, 3)), Source.SCORES), 1)


class TestMatch:
    def test_perfect_diagonal(self):
        D = np.full((30, 30), 5.0)
        np.fill_diagonal(D, 0.0)
        out = match(DifferenceMatrix(D, Source.SCORES), SeqSlamConfig(ds=5))
        assert all(m.best_ref is None for m in out[:4])
        assert [m.best_ref for m in out[4:]] == list(range(4, 30))
        assert all(m.score == 0.0 for m in out[4:])

    def test_planted_offset_line(self, rng):
        D = 1.0 + rng.random((10, 10))
        for q in range(2, 10):
            D[q - 2, q] = 0.0
        cfg = SeqSlamConfig(ds=3)
        out = match(DifferenceMatrix(D, Source.SCORES), cfg)
        expected = brute_match(D.tolist(), 3, cfg.velocities().tolist())
        assert [m.best_ref for m in out[2:]] == expected
        assert [m.best_ref for m in out[4:]] == [q - 2 for q in range(4, 10)]

    def test_brute_force_on_random_matrices(self, rng):
        cfg = SeqSlamConfig(ds=4, vmin=0.5, vmax=1.5, vstep=0.25)
        for _ in range(5):
            D = rng.random((12, 9))
            out = match(DifferenceMatrix(D, Source.SCORES), cfg)
            assert [m.best_ref for m in out[3:]] == brute_match(D.tolist(), 4, cfg.velocities().tolist())

    def test_scale_invariance(self, rng):
        D = rng.random((25, 25))
        a = match(DifferenceMatrix(D, Source.SCORES), SeqSlamConfig(ds=5))
        b = match(DifferenceMatrix(D * 7.5, Source.SCORES), SeqSlamConfig(ds=5))
        assert [m.best_ref for m in a] == [m.best_ref for m in b]

    def test_ds_longer_than_queries(self):
        with pytest.raises(ValueError, match="ds"):
            match(DifferenceMatrix(np.zeros((5, 4)), Source.SCORES), SeqSlamConfig(ds=5))

    def test_uniqueness_threshold_rejects_ambiguous(self):
        # two equally good parallel lines far apart
        D = np.ones((40, 10))
        for q in range(10):
            D[q, q] = 0.0
            D[q + 25, q] = 0.0
        strict = match(DifferenceMatrix(D, Source.SCORES), SeqSlamConfig(ds=5, threshold=0.5))
        loose = match(DifferenceMatrix(D, Source.SCORES), SeqSlamConfig(ds=5, threshold=1.0))
        assert all(m.best_ref is None for m in strict)
        assert all(m.best_ref is not None for m in loose[4:])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SeqSlamConfig(ds=1)
        with pytest.raises(ValueError):
            SeqSlamConfig(vmin=1.5, vmax=1.0)


def test_identical_traverses_match_exactly():
    ref, query = generate_synthetic(SynthConfig(num_places=60, seed=3))
    cfg = EncoderConfig()
    W = build_projection(cfg)
    ref_bits = encode_batch(W, ref.frames, cfg)
    head, _ = fit(ref_bits, ref.labels, TrainConfig())
    S = forward_batch(head, encode_batch(W, query.frames, cfg))
    D_hat = contrast_enhance(difference_matrix(60, S, "scores"), 10)
    out = match(D_hat, SeqSlamConfig())
    for q, m in enumerate(out[19:], start=19):
        assert m.best_ref is not None and abs(m.best_ref - q) <= 1


def test_matrix_file_roundtrip(tmp_path, rng):
    D = DifferenceMatrix(rng.random((4, 6)), Source.SCORES)
    write_matrix(tmp_path / "d.f32", D, "config_hash=0123")
    raw = (tmp_path / "d.f32").read_bytes()
    assert raw.startswith(b"# config_hash=0123\nR=4 Q=6\n")
    np.testing.assert_array_equal(read_matrix(tmp_path / "d.f32"), D.d.astype(np.float32))
