"""Dataset loading, label mapping, normalization, and fold splitting.

Two on-disk formats are supported: delimited text with one label column, and
a sparse "label idx:value ..." text format with strictly ascending 1-based
indices. Labels are remapped to contiguous ids 0..C-1 with the original
tokens kept for round-tripping.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

_SCALE_FLOOR = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with contiguous integer class labels.

    features: (N, d) float64, finite.
    labels: (N,) int64 in [0, n_classes).
    label_names: original label token per class id.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    label_names: tuple

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.features, np.float64))
        y = np.ascontiguousarray(np.asarray(self.labels, np.int64))
        if X.ndim != 2:
            raise DataError("features must be a 2-D array")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError("labels must be 1-D and match the sample count")
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise DataError("dataset has no samples or no feature columns")
        if not np.isfinite(X).all():
            raise DataError("features contain non-finite values")
        if self.n_classes < 1:
            raise DataError("n_classes must be at least 1")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise DataError("labels out of range for n_classes")
        if len(self.label_names) != self.n_classes:
            raise DataError("label_names length must equal n_classes")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "label_names", tuple(str(s) for s in self.label_names))

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices):
        indices = np.asarray(indices)
        return Dataset(self.features[indices], self.labels[indices],
                       self.n_classes, self.label_names)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature center/scale for the logistic squashing transform."""

    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.center, np.float64))
        s = np.ascontiguousarray(np.asarray(self.scale, np.float64))
        if c.ndim != 1 or s.shape != c.shape:
            raise DataError("center and scale must be matching 1-D arrays")
        if not (np.isfinite(c).all() and np.isfinite(s).all()):
            raise DataError("normalization parameters must be finite")
        if (s <= 0).any():
            raise DataError("scale entries must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "scale", s)


def fit_logistic_normalizer(train):
    """Fit center=mean and scale=std (floored) on training features."""
    X = train.features if isinstance(train, Dataset) else np.asarray(train, np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("normalizer needs a nonempty 2-D feature matrix")
    center = X.mean(axis=0)
    scale = np.maximum(X.std(axis=0), _SCALE_FLOOR)
    return NormalizationParams(center, scale)


def apply_normalization(params, X):
    """Map features through 1/(1+exp(-(x-c)/s)), clamped strictly inside (0,1)."""
    X = np.asarray(X, np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[None, :]
    if X.shape[1] != params.center.shape[0]:
        raise DataError(f"expected {params.center.shape[0]} features, "
                        f"got {X.shape[1]}")
    z = (X - params.center) / params.scale
    # exp overflow saturates to 0 which the clip below handles
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-z))
    lo = np.nextafter(0.0, 1.0)
    hi = np.nextafter(1.0, 0.0)
    np.clip(out, lo, hi, out=out)
    return out[0] if squeeze else out


def _canonical_token(tok):
    """Canonical text for a label token; integral floats print as ints."""
    try:
        f = float(tok)
    except ValueError:
        return tok
    if math.isfinite(f) and f == int(f):
        return str(int(f))
    return repr(f)


def _map_labels(tokens):
    """Map raw label tokens to contiguous ids with a deterministic order.

    Numeric label sets sort numerically, anything else lexicographically.
    """
    canon = [_canonical_token(t) for t in tokens]
    uniq = sorted(set(canon))
    try:
        uniq.sort(key=float)
    except ValueError:
        pass
    index = {name: i for i, name in enumerate(uniq)}
    ids = np.array([index[c] for c in canon], np.int64)
    return ids, tuple(uniq)


def load_csv(path, label_column=-1, has_header=False, delimiter=","):
    """Load a delimited text file with one label column.

    Feature cells must parse as finite floats; the label column may hold any
    token. Rows must all have the same width. At least two classes and one
    feature column are required.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0][1])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label")
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataError(f"{path}: label column {label_column} out of range "
                        f"for width {width}")
    feats = np.empty((len(rows), width - 1))
    tokens = []
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, "
                            f"got {len(row)}")
        tokens.append(row[col])
        k = 0
        for c in range(width):
            if c == col:
                continue
            try:
                v = float(row[c])
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {c + 1}: "
                                f"not a number: {row[c]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{lineno}: column {c + 1}: "
                                "non-finite value")
            feats[r, k] = v
            k += 1
    ids, names = _map_labels(tokens)
    if len(names) < 2:
        raise DataError(f"{path}: need at least two classes, found {len(names)}")
    return Dataset(feats, ids, len(names), names)


def load_features_csv(path, has_header=False, delimiter=","):
    """Load a delimited text file of bare feature rows (no label column)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, "
                            f"got {len(row)}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {c + 1}: "
                                f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{lineno}: column {c + 1}: "
                                "non-finite value")
            out[r, c] = v
    return out


def load_sparse_text(path):
    """Load "label index:value ..." rows with strictly ascending 1-based indices.

    Text after '#' is ignored. The feature count is the largest index seen.
    """
    tokens = []
    entries = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tokens.append(parts[0])
            row = []
            prev = 0
            for part in parts[1:]:
                idx_s, _, val_s = part.partition(":")
                if not _:
                    raise DataError(f"{path}:{lineno}: malformed pair "
                                    f"{part!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad index "
                                    f"{idx_s!r}") from None
                try:
                    val = float(val_s)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad value "
                                    f"{val_s!r}") from None
                if idx < 1:
                    raise DataError(f"{path}:{lineno}: indices are 1-based, "
                                    f"got {idx}")
                if idx <= prev:
                    raise DataError(f"{path}:{lineno}: indices must be "
                                    f"strictly ascending ({idx} after {prev})")
                if not math.isfinite(val):
                    raise DataError(f"{path}:{lineno}: non-finite value")
                prev = idx
                row.append((idx, val))
            max_idx = max(max_idx, prev)
            entries.append(row)
    if not entries:
        raise DataError(f"{path}: no data rows")
    if max_idx == 0:
        raise DataError(f"{path}: no feature indices present")
    feats = np.zeros((len(entries), max_idx))
    for r, row in enumerate(entries):
        for idx, val in row:
            feats[r, idx - 1] = val
    ids, names = _map_labels(tokens)
    if len(names) < 2:
        raise DataError(f"{path}: need at least two classes, found {len(names)}")
    return Dataset(feats, ids, len(names), names)


def write_sparse_text(path, dataset):
    """Write a dataset in the sparse text format; zeros are omitted.

    If the last feature column is entirely zero, one explicit zero entry is
    emitted on the first row so the width survives a round trip.
    """
    X = dataset.features
    d = X.shape[1]
    need_pin = not np.any(X[:, d - 1] != 0.0)
    with open(path, "w") as fh:
        for r in range(X.shape[0]):
            parts = [dataset.label_names[dataset.labels[r]]]
            nz = np.nonzero(X[r] != 0.0)[0]
            parts.extend(f"{j + 1}:{float(X[r, j])!r}" for j in nz)
            if need_pin and r == 0:
                parts.append(f"{d}:0.0")
            fh.write(" ".join(parts) + "\n")


def stratified_kfold(labels, k, seed):
    """Split into k folds with per-class test counts differing by at most one.

    Returns a list of (train_indices, test_indices) pairs, both sorted.
    Requires every class to have at least k members.
    """
    labels = np.asarray(labels, np.int64)
    if k < 2:
        raise DataError("fold count must be at least 2")
    counts = np.bincount(labels)
    if counts.size == 0 or (counts[counts > 0] < k).any():
        raise DataError(f"every class needs at least {k} samples for "
                        f"{k}-fold splitting")
    rng = np.random.default_rng(seed)
    test_lists = [[] for _ in range(k)]
    for c in range(counts.size):
        members = np.nonzero(labels == c)[0]
        if members.size == 0:
            continue
        perm = members[rng.permutation(members.size)]
        base, rem = divmod(perm.size, k)
        start = 0
        for f in range(k):
            # rotate which folds take the remainder so fold sizes stay even
            extra = 1 if (f - c) % k < rem else 0
            stop = start + base + extra
            test_lists[f].extend(perm[start:stop])
            start = stop
    folds = []
    all_idx = np.arange(labels.size)
    for f in range(k):
        test = np.sort(np.array(test_lists[f], np.int64))
        mask = np.ones(labels.size, bool)
        mask[test] = False
        folds.append((all_idx[mask], test))
    return folds
