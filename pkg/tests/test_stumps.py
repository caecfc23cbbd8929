"""Tests for stump generation and bit-packed evaluation."""

import numpy as np
import pytest

from mbkl._backend import words_for
from mbkl.errors import DataError
from mbkl.stumps import (BitMatrix, Stump, dump_stumps_csv, evaluate_bank,
                         evaluate_bank_samples, evaluate_stump,
                         generate_stumps, pack_sample_mask, stump_arrays)


def pack_rows_reference(bits):
    """Pack boolean rows little-endian into uint64 words via np.packbits."""
    bits = np.asarray(bits, bool)
    packed = np.packbits(bits, axis=1, bitorder="little")
    want = words_for(bits.shape[1]) * 8
    if packed.shape[1] < want:
        pad = np.zeros((bits.shape[0], want - packed.shape[1]), np.uint8)
        packed = np.concatenate([packed, pad], axis=1)
    return np.ascontiguousarray(packed).view(np.uint64)


class TestGenerate:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 5))
        a = generate_stumps(X, 50, seed=7)
        b = generate_stumps(X, 50, seed=7)
        assert a == b
        c = generate_stumps(X, 50, seed=8)
        assert a != c

    def test_thresholds_within_observed_range(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(-3, 9, (40, 6))
        lo, hi = X.min(axis=0), X.max(axis=0)
        for s in generate_stumps(X, 500, seed=2):
            assert 0 <= s.feature_index < 6
            assert lo[s.feature_index] <= s.threshold <= hi[s.feature_index]

    def test_features_drawn_uniformly(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(20, 4))
        idx, _ = stump_arrays(generate_stumps(X, 8000, seed=3))
        counts = np.bincount(idx, minlength=4)
        # loose band around the expected 2000 per feature
        assert counts.min() > 1600 and counts.max() < 2400

    def test_constant_column_stump_never_fires(self):
        X = np.column_stack([np.full(15, 2.5), np.arange(15.0)])
        stumps = [s for s in generate_stumps(X, 200, seed=4)
                  if s.feature_index == 0]
        assert stumps
        for s in stumps:
            assert s.threshold == 2.5
            assert not evaluate_stump(s, X).any()

    def test_input_validation(self):
        with pytest.raises(DataError):
            generate_stumps(np.zeros((0, 3)), 10, seed=0)
        with pytest.raises(DataError):
            generate_stumps(np.zeros((3, 2)), 0, seed=0)
        with pytest.raises(DataError):
            generate_stumps(np.array([[np.nan, 0.0]]), 5, seed=0)


class TestEvaluate:
    def test_strict_inequality_at_threshold(self):
        s = Stump(0, 1.0)
        X = np.array([[0.5], [1.0], [1.0 + 1e-12], [2.0]])
        np.testing.assert_array_equal(evaluate_stump(s, X),
                                      [False, False, True, True])

    def test_feature_out_of_range(self):
        with pytest.raises(DataError):
            evaluate_stump(Stump(3, 0.0), np.zeros((2, 2)))

    def test_bank_matches_per_stump_loop(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(70, 3))
        stumps = generate_stumps(X, 130, seed=6)
        idx, thr = stump_arrays(stumps)
        bits = evaluate_bank(idx, thr, X).to_bool()
        for k, s in enumerate(stumps):
            np.testing.assert_array_equal(bits[k], evaluate_stump(s, X))

    def test_stump_major_packing_matches_packbits(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(100, 4))
        idx, thr = stump_arrays(generate_stumps(X, 65, seed=7))
        bm = evaluate_bank(idx, thr, X)
        raw = np.array([X[:, i] > t for i, t in zip(idx, thr)])
        np.testing.assert_array_equal(bm.words, pack_rows_reference(raw))

    def test_sample_major_is_transpose_of_stump_major(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(67, 5))
        idx, thr = stump_arrays(generate_stumps(X, 129, seed=8))
        rows = evaluate_bank_samples(idx, thr, X)
        raw = np.array([X[:, i] > t for i, t in zip(idx, thr)])
        np.testing.assert_array_equal(rows, pack_rows_reference(raw.T))

    def test_bank_rejects_out_of_range_index(self):
        with pytest.raises(DataError):
            evaluate_bank(np.array([5], np.uint32), np.array([0.0]),
                          np.zeros((3, 2)))


class TestBitMatrix:
    def test_padding_bits_are_zero(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(3, 2))
        idx, thr = stump_arrays(generate_stumps(X, 4, seed=9))
        bm = evaluate_bank(idx, thr, X)
        assert bm.words.shape == (4, 1)
        assert not (bm.words >> np.uint64(3)).any()

    def test_popcounts_match_bool_sum(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(130, 3))
        idx, thr = stump_arrays(generate_stumps(X, 40, seed=10))
        bm = evaluate_bank(idx, thr, X)
        np.testing.assert_array_equal(bm.popcounts(),
                                      bm.to_bool().sum(axis=1))

    def test_select_rows(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(20, 2))
        idx, thr = stump_arrays(generate_stumps(X, 10, seed=11))
        bm = evaluate_bank(idx, thr, X)
        sub = bm.select(np.array([7, 2, 2]))
        assert sub.n_stumps == 3
        np.testing.assert_array_equal(sub.to_bool(),
                                      bm.to_bool()[[7, 2, 2]])

    def test_shape_validation(self):
        with pytest.raises(DataError):
            BitMatrix(np.zeros((2, 2), np.uint64), 2, 64)
        with pytest.raises(DataError):
            BitMatrix(np.zeros((3, 1), np.uint64), 2, 10)


class TestHelpers:
    def test_pack_sample_mask_round_trip(self):
        rng = np.random.default_rng(11)
        mask = rng.random(77) < 0.4
        word_row = pack_sample_mask(mask)
        assert word_row.shape == (words_for(77),)
        np.testing.assert_array_equal(word_row,
                                      pack_rows_reference(mask[None, :])[0])

    def test_stump_arrays_dtypes(self):
        idx, thr = stump_arrays([Stump(3, 0.25), Stump(0, -1.0)])
        assert idx.dtype == np.uint32 and thr.dtype == np.float64
        np.testing.assert_array_equal(idx, [3, 0])
        np.testing.assert_array_equal(thr, [0.25, -1.0])

    def test_dump_csv(self, tmp_path):
        path = tmp_path / "stumps.csv"
        dump_stumps_csv([Stump(1, 0.5), Stump(0, -2.25)], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,feature_index,threshold"
        assert lines[1] == "0,1,0.5"
        assert lines[2] == "1,0,-2.25"
