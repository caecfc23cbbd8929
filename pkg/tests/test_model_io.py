"""Round-trip and corruption tests for the binary model container."""

import json

import numpy as np
import pytest

from mbkl.errors import DataError
from mbkl.model_io import (MAGIC, deserialize_model, load_model,
                           model_to_json, save_model, serialize_model)
from mbkl.pipeline import (TrainConfig, predict_batch, train, train_baseline)

FAST = dict(n_stumps=120, tol_step1=1e-4, tol_step2=1e-6,
            max_epochs_step1=60000, max_epochs_step2=60000)


@pytest.fixture
def stump_model(blob_dataset):
    model, _ = train(blob_dataset, TrainConfig(seed=201, **FAST))
    return model


@pytest.fixture
def linear_model(blob_dataset):
    model, _ = train_baseline(blob_dataset, TrainConfig(seed=202, **FAST),
                              "linear")
    return model


class TestRoundTrip:
    def test_stump_model_bytes_stable(self, stump_model):
        blob = serialize_model(stump_model)
        assert blob[:4] == MAGIC
        back = deserialize_model(blob)
        assert serialize_model(back) == blob

    def test_stump_model_fields(self, stump_model):
        back = deserialize_model(serialize_model(stump_model))
        np.testing.assert_array_equal(back.bank.feature_indices,
                                      stump_model.bank.feature_indices)
        np.testing.assert_array_equal(back.bank.thresholds,
                                      stump_model.bank.thresholds)
        np.testing.assert_array_equal(back.bank.theta, stump_model.bank.theta)
        np.testing.assert_array_equal(back.class_weights,
                                      stump_model.class_weights)
        np.testing.assert_array_equal(back.class_biases,
                                      stump_model.class_biases)
        assert back.label_names == stump_model.label_names
        assert back.n_features == stump_model.n_features
        np.testing.assert_array_equal(back.normalization.center,
                                      stump_model.normalization.center)
        np.testing.assert_array_equal(back.normalization.scale,
                                      stump_model.normalization.scale)

    def test_predictions_survive_round_trip(self, stump_model, blob_dataset):
        back = deserialize_model(serialize_model(stump_model))
        c1, s1 = predict_batch(stump_model, blob_dataset.features)
        c2, s2 = predict_batch(back, blob_dataset.features)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(s1, s2)

    def test_linear_model_round_trip(self, linear_model, blob_dataset):
        blob = serialize_model(linear_model)
        back = deserialize_model(blob)
        assert serialize_model(back) == blob
        np.testing.assert_array_equal(back.weights, linear_model.weights)
        np.testing.assert_array_equal(back.biases, linear_model.biases)
        c1, _ = predict_batch(linear_model, blob_dataset.features)
        c2, _ = predict_batch(back, blob_dataset.features)
        np.testing.assert_array_equal(c1, c2)

    def test_unnormalized_model_round_trip(self, toy_dataset):
        cfg = TrainConfig(seed=203, normalize=False, **FAST)
        model, _ = train(toy_dataset, cfg)
        back = deserialize_model(serialize_model(model))
        assert back.normalization is None

    def test_file_round_trip(self, stump_model, tmp_path):
        path = tmp_path / "model.bin"
        save_model(stump_model, path)
        back = load_model(path)
        assert serialize_model(back) == serialize_model(stump_model)

    def test_unicode_label_names(self, blob_dataset):
        from mbkl.data import Dataset
        ds = Dataset(blob_dataset.features, blob_dataset.labels, 2,
                     ("naïve", "prüfung"))
        model, _ = train(ds, TrainConfig(seed=204, **FAST))
        back = deserialize_model(serialize_model(model))
        assert back.label_names == ("naïve", "prüfung")


class TestCorruption:
    def test_bad_magic(self, stump_model):
        blob = bytearray(serialize_model(stump_model))
        blob[:4] = b"XXXX"
        with pytest.raises(DataError, match="magic"):
            deserialize_model(bytes(blob))

    def test_bad_version(self, stump_model):
        blob = bytearray(serialize_model(stump_model))
        blob[4] = 99
        with pytest.raises(DataError, match="version"):
            deserialize_model(bytes(blob))

    def test_unknown_kind(self, stump_model):
        blob = bytearray(serialize_model(stump_model))
        blob[8] = 7
        with pytest.raises(DataError, match="kind"):
            deserialize_model(bytes(blob))

    def test_truncation_every_prefix_rejected(self, stump_model):
        blob = serialize_model(stump_model)
        for cut in (3, 8, 20, len(blob) // 2, len(blob) - 1):
            with pytest.raises(DataError):
                deserialize_model(blob[:cut])

    def test_trailing_bytes_rejected(self, stump_model):
        blob = serialize_model(stump_model) + b"\x00"
        with pytest.raises(DataError, match="trailing"):
            deserialize_model(blob)

    def test_unserializable_object(self):
        with pytest.raises(DataError):
            serialize_model(object())


class TestJsonExport:
    def test_deterministic_and_parsable(self, stump_model):
        a = model_to_json(stump_model)
        b = model_to_json(stump_model)
        assert a == b
        doc = json.loads(a)
        assert doc["n_features"] == stump_model.n_features
        assert len(doc["stumps"]) == stump_model.bank.n_stumps

    def test_linear_json(self, linear_model):
        doc = json.loads(model_to_json(linear_model))
        assert doc["kind"] == "linear"
        assert len(doc["weights"]) == linear_model.n_classes
