"""Random decision stumps and their packed evaluations.

A stump fires when one feature strictly exceeds a threshold. Stumps are
drawn without looking at labels: a uniform feature index and a threshold
uniform over that feature's observed training range. Evaluations are stored
bit-packed (64 samples or stumps per word) for popcount-based reductions.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import core, words_for
from .errors import DataError


@dataclass(frozen=True)
class Stump:
    """Single threshold test: fires when x[feature_index] > threshold."""

    feature_index: int
    threshold: float


@dataclass(frozen=True)
class BitMatrix:
    """Stump-major packed evaluations: bit j of words[k] is stump k on sample j.

    Padding bits past n_samples are zero.
    """

    words: np.ndarray
    n_stumps: int
    n_samples: int

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.words, np.uint64))
        if w.ndim != 2 or w.shape[0] != self.n_stumps:
            raise DataError("words must be (n_stumps, n_words)")
        if w.shape[1] != words_for(self.n_samples):
            raise DataError("word count does not match n_samples")
        object.__setattr__(self, "words", w)

    def to_bool(self):
        """Unpack to a boolean (n_stumps, n_samples) array."""
        bytes_ = self.words.view(np.uint8).reshape(self.n_stumps, -1)
        bits = np.unpackbits(bytes_, axis=1, bitorder="little")
        return bits[:, :self.n_samples].astype(bool)

    def popcounts(self):
        """Per-stump count of set bits."""
        out = np.empty(self.n_stumps, np.int64)
        core.popcount_rows(self.words, out)
        return out

    def select(self, rows):
        rows = np.asarray(rows)
        return BitMatrix(np.ascontiguousarray(self.words[rows]),
                         int(rows.shape[0]), self.n_samples)


def generate_stumps(X, count, seed):
    """Draw `count` random stumps from the observed ranges of X's columns.

    Labels are never consulted. A constant column yields stumps that never
    fire (threshold equals the constant, and the test is strict).
    """
    X = np.asarray(X, np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError("stump generation needs a nonempty 2-D feature matrix")
    if count < 1:
        raise DataError("stump count must be positive")
    if not np.isfinite(X).all():
        raise DataError("features contain non-finite values")
    rng = np.random.default_rng(seed)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    idx = rng.integers(0, X.shape[1], size=count)
    u = rng.random(count)
    thr = lo[idx] + u * (hi[idx] - lo[idx])
    return [Stump(int(i), float(t)) for i, t in zip(idx, thr)]


def stump_arrays(stumps):
    """Split a stump list into (feature_indices uint32, thresholds float64)."""
    idx = np.fromiter((s.feature_index for s in stumps), np.uint32,
                      count=len(stumps))
    thr = np.fromiter((s.threshold for s in stumps), np.float64,
                      count=len(stumps))
    return idx, thr


def evaluate_stump(stump, X):
    """Boolean firing pattern of one stump over rows of X."""
    X = np.asarray(X, np.float64)
    if stump.feature_index >= X.shape[1]:
        raise DataError(f"stump feature {stump.feature_index} out of range "
                        f"for {X.shape[1]} features")
    return X[:, stump.feature_index] > stump.threshold


def evaluate_bank(idx, thr, X):
    """Evaluate a stump bank on X, packed stump-major into a BitMatrix."""
    X = np.ascontiguousarray(np.asarray(X, np.float64))
    idx = np.ascontiguousarray(np.asarray(idx, np.uint32))
    thr = np.ascontiguousarray(np.asarray(thr, np.float64))
    if idx.size and int(idx.max()) >= X.shape[1]:
        raise DataError("stump feature index out of range for this data")
    K, N = idx.shape[0], X.shape[0]
    out = np.empty((K, words_for(N)), np.uint64)
    core.eval_pack_stumps(X, idx, thr, out)
    return BitMatrix(out, K, N)


def evaluate_bank_samples(idx, thr, X):
    """Evaluate a stump bank on X, packed sample-major: (N, words) uint64."""
    X = np.ascontiguousarray(np.asarray(X, np.float64))
    idx = np.ascontiguousarray(np.asarray(idx, np.uint32))
    thr = np.ascontiguousarray(np.asarray(thr, np.float64))
    if idx.size and int(idx.max()) >= X.shape[1]:
        raise DataError("stump feature index out of range for this data")
    out = np.empty((X.shape[0], words_for(idx.shape[0])), np.uint64)
    core.eval_pack_samples(X, idx, thr, out)
    return out


def pack_sample_mask(mask):
    """Pack a boolean sample mask into a (n_words,) uint64 row."""
    mask = np.asarray(mask, bool)
    packed = np.packbits(mask[None, :], axis=1, bitorder="little")
    want = words_for(mask.size) * 8
    if packed.shape[1] < want:
        pad = np.zeros((1, want - packed.shape[1]), np.uint8)
        packed = np.concatenate([packed, pad], axis=1)
    return packed.view(np.uint64)[0]


def dump_stumps_csv(stumps, path):
    """Write stumps as "k,feature_index,threshold" rows for inspection."""
    with open(path, "w") as fh:
        fh.write("k,feature_index,threshold\n")
        for k, s in enumerate(stumps):
            fh.write(f"{k},{s.feature_index},{s.threshold!r}\n")
