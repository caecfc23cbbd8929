"""Solver tests: exact-oracle batteries, bias recovery, certificates, edges."""

import numpy as np
import pytest

from mbkl.errors import DataError
from mbkl.linsvm import (LinearModel, SolverConfig, best_bias,
                         decision_values, train_l1, train_l2)

from oracles import (hinge_objective_l1, hinge_objective_l2, oracle_bias_value,
                     oracle_l1, oracle_l2)

TIGHT = SolverConfig(C=1.0, tol=1e-9, max_epochs=400000)


def random_instance(rng, n_max=6, m_max=3):
    """Small random +-1 problem guaranteed to contain both classes."""
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    X = rng.normal(size=(n, m))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


class TestBestBias:
    def test_matches_breakpoint_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            scores = rng.normal(size=n)
            y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
            C = float(rng.uniform(0.1, 5.0))
            b, h = best_bias(scores, y)
            np.testing.assert_allclose(C * h, oracle_bias_value(scores, y, C),
                                       rtol=0, atol=1e-12)

    def test_all_positive_saturates(self):
        scores = np.array([-3.0, 2.0])
        b, h = best_bias(scores, np.array([1.0, 1.0]))
        assert h == 0.0
        assert 1.0 - (scores + b).min() <= 0.0

    def test_all_negative_saturates(self):
        scores = np.array([-3.0, 2.0])
        b, h = best_bias(scores, np.array([-1.0, -1.0]))
        assert h == 0.0

    def test_flat_interval_resolves_to_midpoint(self):
        # separable pair: hinge is zero for b in [-1, 1], midpoint is 0
        scores = np.array([2.0, -2.0])
        y = np.array([1.0, -1.0])
        b, h = best_bias(scores, y)
        assert h == 0.0
        np.testing.assert_allclose(b, 0.0, atol=1e-12)


class TestSquaredNormSolver:
    def test_oracle_battery(self):
        rng = np.random.default_rng(31)
        worst = 0.0
        for k in range(25):
            X, y = random_instance(rng)
            C = (0.1, 1.0, 10.0)[k % 3]
            cfg = SolverConfig(C=C, tol=1e-9, max_epochs=400000)
            model = train_l2(X, y, cfg)
            opt = oracle_l2(X, y, C)
            rel = abs(model.objective - opt) / max(1.0, abs(opt))
            worst = max(worst, rel)
            # certificate sandwich: dual bound below the optimum, primal above
            assert model.objective - model.gap <= opt + 1e-7
            assert opt <= model.objective + 1e-7
        assert worst < 1e-6

    def test_objective_matches_recompute(self):
        rng = np.random.default_rng(32)
        X, y = random_instance(rng, n_max=8)
        model = train_l2(X, y, TIGHT)
        np.testing.assert_allclose(
            model.objective,
            hinge_objective_l2(X, y, model.weights, model.bias, TIGHT.C),
            rtol=1e-12)

    def test_separable_data_margin(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        model = train_l2(X, y, SolverConfig(C=100.0, tol=1e-9,
                                            max_epochs=200000))
        margins = y * decision_values(model, X)
        assert (margins >= 1.0 - 1e-6).all()

    def test_warm_start_reaches_same_objective(self):
        rng = np.random.default_rng(33)
        X, y = random_instance(rng, n_max=8)
        cold, state = train_l2(X, y, TIGHT, return_state=True)
        warm = train_l2(X, y, TIGHT, warm_start=state)
        np.testing.assert_allclose(warm.objective, cold.objective, rtol=1e-8)

    def test_objective_nondecreasing_in_c(self):
        rng = np.random.default_rng(34)
        X, y = random_instance(rng, n_max=8)
        vals = [train_l2(X, y, SolverConfig(C=C, tol=1e-9,
                                            max_epochs=400000)).objective
                for C in (0.1, 1.0, 10.0)]
        assert vals[0] <= vals[1] + 1e-8 and vals[1] <= vals[2] + 1e-8


class TestL1Solver:
    def test_oracle_battery(self):
        rng = np.random.default_rng(41)
        worst = 0.0
        for k in range(25):
            X, y = random_instance(rng)
            C = (0.1, 1.0, 10.0)[k % 3]
            cfg = SolverConfig(C=C, tol=1e-9, max_epochs=400000)
            model = train_l1(X, y, cfg)
            opt = oracle_l1(X, y, C)
            rel = abs(model.objective - opt) / max(1.0, abs(opt))
            worst = max(worst, rel)
            assert model.objective - model.gap <= opt + 1e-7
            assert opt <= model.objective + 1e-7
        assert worst < 1e-6

    def test_objective_matches_recompute(self):
        rng = np.random.default_rng(42)
        X, y = random_instance(rng, n_max=8)
        model = train_l1(X, y, TIGHT)
        np.testing.assert_allclose(
            model.objective,
            hinge_objective_l1(X, y, model.weights, model.bias, TIGHT.C),
            rtol=1e-12)

    def test_small_c_gives_structural_zeros(self):
        rng = np.random.default_rng(43)
        X = rng.normal(size=(40, 10))
        y = np.where(X[:, 0] + 0.3 * rng.normal(size=40) > 0, 1.0, -1.0)
        if not ((y > 0).any() and (y < 0).any()):
            y[0] = -y[0]
        model = train_l1(X, y, SolverConfig(C=0.05, tol=1e-8,
                                            max_epochs=200000))
        # exact zeros from the proximal shrink, no thresholding involved
        assert np.count_nonzero(model.weights == 0.0) >= 5

    def test_large_c_separable_uses_informative_feature(self):
        X = np.column_stack([np.array([-2.0, -1.0, 1.0, 2.0]),
                             np.zeros(4)])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        model = train_l1(X, y, SolverConfig(C=10.0, tol=1e-9,
                                            max_epochs=200000))
        assert abs(model.weights[0]) > 1e-3
        preds = np.sign(decision_values(model, X))
        np.testing.assert_array_equal(preds, y)

    def test_warm_start_reaches_same_objective(self):
        rng = np.random.default_rng(44)
        X, y = random_instance(rng, n_max=8)
        cold, state = train_l1(X, y, TIGHT, return_state=True)
        warm = train_l1(X, y, TIGHT, warm_start=state)
        np.testing.assert_allclose(warm.objective, cold.objective, rtol=1e-8)


class TestDegenerateInputs:
    def test_single_class_requires_flag(self):
        X = np.ones((3, 2))
        y = np.ones(3)
        with pytest.raises(DataError):
            train_l2(X, y, TIGHT)
        with pytest.raises(DataError):
            train_l1(X, y, TIGHT)

    def test_single_class_model_is_constant(self):
        X = np.random.default_rng(51).normal(size=(4, 2))
        for y, want in [(np.ones(4), 1.0), (-np.ones(4), -1.0)]:
            for train in (train_l2, train_l1):
                model = train(X, y, TIGHT, allow_single_class=True)
                np.testing.assert_array_equal(model.weights, 0.0)
                assert model.bias == want
                assert model.converged and model.gap == 0.0

    def test_zero_feature_columns(self):
        X = np.empty((4, 0))
        y = np.array([1.0, -1.0, 1.0, -1.0])
        for train in (train_l2, train_l1):
            model = train(X, y, TIGHT)
            assert model.weights.shape == (0,)
            assert model.converged

    def test_bad_labels_rejected(self):
        X = np.zeros((2, 1))
        with pytest.raises(DataError):
            train_l2(X, np.array([0.0, 1.0]), TIGHT)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataError):
            train_l1(np.zeros((3, 1)), np.array([1.0, -1.0]), TIGHT)

    def test_config_validation(self):
        with pytest.raises(DataError):
            SolverConfig(C=0.0)
        with pytest.raises(DataError):
            SolverConfig(tol=-1e-3)
        with pytest.raises(DataError):
            SolverConfig(max_epochs=0)

    def test_decision_values_validates_width(self):
        model = LinearModel(np.ones(2), 0.0, 0.0, True, 0.0, 0)
        with pytest.raises(DataError):
            decision_values(model, np.zeros((2, 3)))
