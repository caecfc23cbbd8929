"""Kernel-space diagnostics for the learned stump kernel.

The kernel between two samples is the theta-weighted count of stumps that
agree on them. Everything here works off a StumpBank; nothing requires a
trained output layer.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import core, words_for
from .errors import DataError
from .stumps import evaluate_bank_samples

_PAIR_CAP = 100_000


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric Gram matrix with a note on where it came from."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, np.float64))
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError("kernel matrix must be square")
        if not np.array_equal(v, v.T):
            raise DataError("kernel matrix must be symmetric")
        object.__setattr__(self, "values", v)

    @property
    def n_samples(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class CorrelationReport:
    """Paired histogram and kernel distances with the Pearson correlation."""

    chi2: np.ndarray
    kernel_distance: np.ndarray
    pearson_r: float
    degenerate: bool
    n_pairs: int
    n_stumps: int
    seed: int


def _bank_bits(bank, X):
    X = np.ascontiguousarray(np.asarray(X, np.float64))
    if X.ndim != 2:
        raise DataError("expected a 2-D sample matrix")
    return evaluate_bank_samples(bank.feature_indices, bank.thresholds, X)


def mbk_kernel(x, xp, bank):
    """Weighted agreement count between two samples.

    Uniform weights go through packed XNOR + popcount; general weights sum
    the agreement indicators scalar by scalar.
    """
    if bank.n_stumps == 0:
        raise DataError("the stump bank is empty")
    X = np.vstack([np.asarray(x, np.float64), np.asarray(xp, np.float64)])
    theta = bank.theta
    if np.all(theta == theta[0]):
        words = _bank_bits(bank, X)
        h = core.pair_hamming(words[0], words[1])
        return float(theta.sum()) - float(theta[0]) * h
    fired = X[:, bank.feature_indices] > bank.thresholds
    agree = fired[0] == fired[1]
    return float(theta[agree].sum())


def sqrt_theta_map(x, bank):
    """Explicit map whose dot products reproduce the kernel.

    Entries come in pairs (sqrt(theta_k) * fired, sqrt(theta_k) * unfired),
    so the squared norm is the total weight.
    """
    x = np.asarray(x, np.float64)
    fired = (x[bank.feature_indices] > bank.thresholds).astype(np.float64)
    root = np.sqrt(bank.theta)
    out = np.empty(2 * bank.n_stumps)
    out[0::2] = root * fired
    out[1::2] = root * (1.0 - fired)
    return out


def gram_matrix(data, bank, labels=None, max_samples=2000):
    """Full kernel matrix over the rows of data.

    With labels given, rows are reordered by class id (stable) so block
    structure shows up in heatmap exports. The diagonal is pinned to the
    total weight, which is its exact value.
    """
    X = np.ascontiguousarray(np.asarray(data, np.float64))
    if X.ndim != 2:
        raise DataError("expected a 2-D sample matrix")
    n = X.shape[0]
    if n > max_samples:
        raise DataError(f"{n} samples exceed the gram limit {max_samples}; "
                        f"raise max_samples explicitly for a matrix this big")
    if bank.n_stumps == 0:
        raise DataError("the stump bank is empty")
    order = None
    if labels is not None:
        labels = np.asarray(labels, np.int64)
        if labels.shape != (n,):
            raise DataError("labels must match the sample count")
        order = np.argsort(labels, kind="stable")
        X = np.ascontiguousarray(X[order])
    theta = bank.theta
    total = float(theta.sum())
    if np.all(theta == theta[0]):
        words = _bank_bits(bank, X)
        H = np.empty((n, n), np.int64)
        core.hamming_gram(words, H)
        K = total - float(theta[0]) * H
        src = "uniform-weight stump kernel"
    else:
        fired = (X[:, bank.feature_indices] > bank.thresholds)
        P = fired * np.sqrt(theta)
        G = P @ P.T
        s = fired @ theta
        K = 2.0 * G + total - s[:, None] - s[None, :]
        K = 0.5 * (K + K.T)
        src = "weighted stump kernel"
    np.fill_diagonal(K, total)
    matrix = KernelMatrix(K, src)
    return (matrix, order) if labels is not None else matrix


def chi2_distance(h, hp):
    """Half the squared relative difference between two histograms.

    Bins where both entries are zero contribute nothing.
    """
    h = np.asarray(h, np.float64)
    hp = np.asarray(hp, np.float64)
    if h.shape != hp.shape or h.ndim != 1:
        raise DataError("histograms must be matching 1-D vectors")
    if (h < 0).any() or (hp < 0).any():
        raise DataError("histograms must be nonnegative")
    denom = h + hp
    mask = denom > 0
    diff = h[mask] - hp[mask]
    return float(0.5 * np.sum(diff * diff / denom[mask]))


def _sample_pairs(n, cap, rng):
    """Distinct unordered index pairs, all of them when few enough."""
    total = n * (n - 1) // 2
    if total <= cap:
        iu = np.triu_indices(n, k=1)
        return iu[0].astype(np.int64), iu[1].astype(np.int64)
    codes = np.empty(0, np.int64)
    while codes.size < cap:
        a = rng.integers(0, n, size=2 * cap)
        b = rng.integers(0, n, size=2 * cap)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keep = lo != hi
        new = lo[keep] * n + hi[keep]
        codes = np.unique(np.concatenate([codes, new]))
    codes = codes[rng.permutation(codes.size)[:cap]]
    codes.sort()
    return codes // n, codes % n


def distance_correlation_report(data, n_stumps, seed, pair_cap=_PAIR_CAP):
    """Compare histogram distance against the unit-weight kernel distance.

    Draws a unit-weight bank of the requested size on the data, then for
    each sampled pair emits (chi2 distance, 1 - agreement/n_stumps) and the
    Pearson correlation between the two columns.
    """
    from .pipeline import StumpBank
    from .stumps import generate_stumps, stump_arrays

    X = np.ascontiguousarray(np.asarray(data, np.float64))
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("need at least two histogram rows")
    if (X < 0).any():
        raise DataError("histogram rows must be nonnegative")
    if n_stumps < 1:
        raise DataError("need at least one stump for a normalized distance")
    stumps = generate_stumps(X, n_stumps, seed)
    idx, thr = stump_arrays(stumps)
    bank = StumpBank(idx, thr, np.ones(n_stumps))
    words = _bank_bits(bank, X)

    rng = np.random.default_rng(seed)
    ii, jj = _sample_pairs(X.shape[0], pair_cap, rng)
    m = ii.size
    kd = np.empty(m)
    for t in range(m):
        kd[t] = core.pair_hamming(words[ii[t]], words[jj[t]]) / n_stumps
    cd = np.empty(m)
    for t in range(m):
        cd[t] = chi2_distance(X[ii[t]], X[jj[t]])
    degenerate = bool(cd.std() == 0.0 or kd.std() == 0.0)
    r = float("nan") if degenerate else float(np.corrcoef(cd, kd)[0, 1])
    return CorrelationReport(cd, kd, r, degenerate, m, n_stumps, seed)


def scatter_rows(report):
    """CSV-ready (chi2, kernel_distance) rows for the scatter export."""
    return np.column_stack([report.chi2, report.kernel_distance])
