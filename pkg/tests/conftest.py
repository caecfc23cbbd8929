"""Shared fixtures: small deterministic datasets and csv writers."""

import numpy as np
import pytest

from mbkl.data import Dataset


@pytest.fixture
def toy_dataset():
    """Eight 1-d points split cleanly at zero."""
    X = np.array([[-2.0], [-1.5], [-1.0], [-0.5], [0.5], [1.0], [1.5], [2.0]])
    y = np.array([0, 0, 0, 0, 1, 1, 1, 1], np.int64)
    return Dataset(X, y, 2, ("low", "high"))


@pytest.fixture
def blob_dataset():
    """Two overlapping 4-d gaussian blobs, 60 samples."""
    rng = np.random.default_rng(11)
    n = 30
    X = np.concatenate([rng.normal(0.0, 1.0, (n, 4)),
                        rng.normal(1.5, 1.0, (n, 4))])
    y = np.concatenate([np.zeros(n, np.int64), np.ones(n, np.int64)])
    return Dataset(np.ascontiguousarray(X), y, 2, ("a", "b"))


@pytest.fixture
def three_class_dataset():
    """Three 3-d gaussian blobs, 60 samples."""
    rng = np.random.default_rng(12)
    n = 20
    centers = np.array([[0.0, 0, 0], [2.5, 0, 0], [0, 2.5, 0]])
    X = np.concatenate([rng.normal(c, 0.8, (n, 3)) for c in centers])
    y = np.repeat(np.arange(3, dtype=np.int64), n)
    return Dataset(np.ascontiguousarray(X), y, 3, ("u", "v", "w"))


@pytest.fixture
def csv_writer(tmp_path):
    """Write rows of (features..., label) to a csv file, return its path."""

    def write(X, labels, name="data.csv", header=None):
        path = tmp_path / name
        lines = [] if header is None else [header]
        for row, lab in zip(X, labels):
            lines.append(",".join(repr(float(v)) for v in row) + f",{lab}")
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    return write
