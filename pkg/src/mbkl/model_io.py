"""Binary model container and a JSON export for inspection.

Layout (all integers and floats little-endian):
  magic "MBKL" | version u32 | kind u8
  kind 0 (stump model):
    n_features u32 | n_stumps u32 | n_classes u32 | normalized u8
    labels: n_classes x (u16 byte length + utf-8 bytes)
    if normalized: center f64[n_features] then scale f64[n_features]
    stump records: n_stumps x (feature u32 + threshold f64)
    theta f64[n_stumps]
    per class: weights f64[2 * n_stumps] then bias f64
  kind 1 (linear baseline):
    n_features u32 | n_classes u32 | normalized u8
    labels, optional center/scale as above
    per class: weights f64[n_features] then bias f64

Re-saving a loaded model reproduces the file byte for byte.
"""

import json
import struct

import numpy as np

from .data import NormalizationParams
from .errors import DataError
from .pipeline import LinearBaselineModel, MbklModel, StumpBank

MAGIC = b"MBKL"
VERSION = 1
_KIND_STUMP = 0
_KIND_LINEAR = 1


def _f64(a):
    return np.ascontiguousarray(np.asarray(a, np.float64)).astype("<f8")


def _pack_labels(names):
    out = []
    for name in names:
        raw = str(name).encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError("label name longer than 65535 bytes")
        out.append(struct.pack("<H", len(raw)) + raw)
    return b"".join(out)


def _norm_flag(norm):
    if norm is None:
        return 0, b""
    if not isinstance(norm, NormalizationParams):
        raise DataError("unsupported normalization object")
    return 1, _f64(norm.center).tobytes() + _f64(norm.scale).tobytes()


def serialize_model(model):
    """Encode a trained model to bytes."""
    if isinstance(model, MbklModel):
        bank = model.bank
        flag, norm_bytes = _norm_flag(model.normalization)
        head = struct.pack("<IIIB", model.n_features, bank.n_stumps,
                           model.n_classes, flag)
        records = np.empty(bank.n_stumps, dtype=[("i", "<u4"), ("t", "<f8")])
        records["i"] = bank.feature_indices
        records["t"] = bank.thresholds
        body = [head, _pack_labels(model.label_names), norm_bytes,
                records.tobytes(), _f64(bank.theta).tobytes()]
        for c in range(model.n_classes):
            body.append(_f64(model.class_weights[c]).tobytes())
            body.append(struct.pack("<d", float(model.class_biases[c])))
        return MAGIC + struct.pack("<IB", VERSION, _KIND_STUMP) + b"".join(body)
    if isinstance(model, LinearBaselineModel):
        flag, norm_bytes = _norm_flag(model.normalization)
        head = struct.pack("<IIB", model.n_features, model.n_classes, flag)
        body = [head, _pack_labels(model.label_names), norm_bytes]
        for c in range(model.n_classes):
            body.append(_f64(model.weights[c]).tobytes())
            body.append(struct.pack("<d", float(model.biases[c])))
        return MAGIC + struct.pack("<IB", VERSION, _KIND_LINEAR) + b"".join(body)
    raise DataError(f"cannot serialize a {type(model).__name__}")


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise DataError("model file is truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, n):
        return np.frombuffer(self.take(8 * n), "<f8").astype(np.float64)

    def done(self):
        if self.pos != len(self.blob):
            raise DataError("model file has trailing bytes")


def _read_labels(r, n_classes):
    names = []
    for _ in range(n_classes):
        (length,) = r.unpack("<H")
        names.append(r.take(length).decode("utf-8"))
    return tuple(names)


def _read_norm(r, flag, d):
    if flag == 0:
        return None
    if flag != 1:
        raise DataError("bad normalization flag")
    return NormalizationParams(r.floats(d), r.floats(d))


def deserialize_model(blob):
    """Decode bytes produced by serialize_model."""
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise DataError("not a model file (bad magic)")
    version, kind = r.unpack("<IB")
    if version != VERSION:
        raise DataError(f"unsupported model version {version}")
    if kind == _KIND_STUMP:
        d, n_stumps, n_classes, flag = r.unpack("<IIIB")
        names = _read_labels(r, n_classes)
        norm = _read_norm(r, flag, d)
        records = np.frombuffer(r.take(12 * n_stumps),
                                dtype=[("i", "<u4"), ("t", "<f8")])
        theta = r.floats(n_stumps)
        weights = np.empty((n_classes, 2 * n_stumps))
        biases = np.empty(n_classes)
        for c in range(n_classes):
            weights[c] = r.floats(2 * n_stumps)
            (biases[c],) = r.unpack("<d")
        r.done()
        bank = StumpBank(records["i"].astype(np.uint32),
                         records["t"].astype(np.float64), theta)
        return MbklModel(bank, weights, biases, norm, names, int(d))
    if kind == _KIND_LINEAR:
        d, n_classes, flag = r.unpack("<IIB")
        names = _read_labels(r, n_classes)
        norm = _read_norm(r, flag, d)
        weights = np.empty((n_classes, d))
        biases = np.empty(n_classes)
        for c in range(n_classes):
            weights[c] = r.floats(d)
            (biases[c],) = r.unpack("<d")
        r.done()
        return LinearBaselineModel(weights, biases, norm, names, int(d))
    raise DataError(f"unknown model kind {kind}")


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    return deserialize_model(blob)


def model_to_json(model):
    """Readable JSON form of a model, deterministic for a fixed model."""
    if isinstance(model, MbklModel):
        payload = {
            "kind": "stump",
            "n_features": model.n_features,
            "n_classes": model.n_classes,
            "labels": list(model.label_names),
            "stumps": [{"feature": int(i), "threshold": float(t),
                        "weight": float(w)}
                       for i, t, w in zip(model.bank.feature_indices,
                                          model.bank.thresholds,
                                          model.bank.theta)],
            "class_weights": model.class_weights.tolist(),
            "class_biases": model.class_biases.tolist(),
        }
    elif isinstance(model, LinearBaselineModel):
        payload = {
            "kind": "linear",
            "n_features": model.n_features,
            "n_classes": model.n_classes,
            "labels": list(model.label_names),
            "weights": model.weights.tolist(),
            "biases": model.biases.tolist(),
        }
    else:
        raise DataError(f"cannot export a {type(model).__name__}")
    norm = model.normalization
    payload["normalization"] = (None if norm is None else
                                {"center": norm.center.tolist(),
                                 "scale": norm.scale.tolist()})
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
