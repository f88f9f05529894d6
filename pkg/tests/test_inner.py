import math

import numpy as np
import pytest

from mixtrain.data import ClassificationDataset, RegressionDataset
from mixtrain.inner import (RIDGE, ridge_lsq_batch, solve_outer_adam,
                            solve_outer_lsq, solve_outer_lsq_batch)
from mixtrain.loss import SoftmaxCrossEntropy
from mixtrain.model import angle_feature_matrix, cosine_feature_matrix


def random_regression(rng, m=40):
    xs = rng.uniform(-1.0, 1.0, m)
    return RegressionDataset(xs, np.sin(3.0 * xs) + 0.1 * rng.standard_normal(m))


class TestSolveOuterLsq:
    def test_matches_normal_equations_oracle(self, normal_equations_ridge):
        rng = np.random.default_rng(0)
        for trial in range(10):
            ds = random_regression(rng)
            thetas = rng.uniform(0.0, 2.0 * math.pi, 12)
            coef, report = solve_outer_lsq(thetas, ds, ridge=1e-6)
            phi = angle_feature_matrix(thetas, ds.inputs)
            # normal equations square the condition number, so demand a bit
            # less than machine precision here
            want = normal_equations_ridge(phi, ds.labels, 1e-6)
            np.testing.assert_allclose(coef, want, rtol=1e-5, atol=1e-8)
            np.testing.assert_array_equal(report.coefficients, coef)
            assert report.residual_loss == pytest.approx(
                float(np.mean((phi @ coef - ds.labels) ** 2)))

    def test_interpolates_easy_system(self):
        # One feature active everywhere: theta = pi/2 gives relu(1) = 1, a
        # constant feature, so a constant label is matched almost exactly.
        ds = RegressionDataset(np.linspace(-1.0, 1.0, 9), np.full(9, 2.5))
        coef, report = solve_outer_lsq([math.pi / 2.0], ds)
        assert coef[0] == pytest.approx(2.5, rel=1e-6)
        assert report.residual_loss < 1e-10

    def test_degenerate_duplicate_features_stay_finite(self):
        rng = np.random.default_rng(1)
        ds = random_regression(rng)
        thetas = np.full(6, 0.7)  # six identical columns: rank 1
        coef, report = solve_outer_lsq(thetas, ds)
        assert np.all(np.isfinite(coef))
        assert math.isfinite(report.residual_loss)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            solve_outer_lsq([0.1], RegressionDataset(np.array([]), np.array([])))


class TestRidgeLsqBatch:
    def test_matches_single_solve(self, normal_equations_ridge):
        rng = np.random.default_rng(2)
        feats = rng.standard_normal((5, 30, 8))
        labels = rng.standard_normal(30)
        coefs = ridge_lsq_batch(feats, labels, ridge=1e-6)
        assert coefs.shape == (5, 8)
        for b in range(5):
            want = normal_equations_ridge(feats[b], labels, 1e-6)
            np.testing.assert_allclose(coefs[b], want, rtol=1e-8, atol=1e-10)

    def test_batch_route_agrees_with_lstsq_route(self):
        rng = np.random.default_rng(3)
        ds = random_regression(rng, m=25)
        thetas_batch = rng.uniform(0.0, 2.0 * math.pi, (4, 10))
        batch = solve_outer_lsq_batch(thetas_batch, ds, ridge=1e-7)
        for b in range(4):
            single, _ = solve_outer_lsq(thetas_batch[b], ds, ridge=1e-7)
            np.testing.assert_allclose(batch[b], single, rtol=1e-6, atol=1e-8)

    def test_nonfinite_features_rejected(self):
        feats = np.ones((1, 3, 2))
        feats[0, 1, 1] = np.inf
        with pytest.raises(ValueError):
            ridge_lsq_batch(feats, np.ones(3))

    def test_rank_deficient_batch_finite(self):
        feats = np.ones((2, 10, 4))  # all columns identical
        coefs = ridge_lsq_batch(feats, np.ones(10), ridge=RIDGE)
        assert np.all(np.isfinite(coefs))
        # ridge splits the weight evenly across identical columns
        np.testing.assert_allclose(coefs[0], np.full(4, 0.25), rtol=1e-4)


class TestSolveOuterAdam:
    @staticmethod
    def toy_classification(rng, m=60, d=3, classes=3):
        xs = rng.random((m, d))
        labels = (xs.sum(axis=1) * classes / d).astype(int).clip(0, classes - 1)
        return ClassificationDataset(xs, labels, classes)

    def test_zero_epochs_returns_zero_init(self):
        rng = np.random.default_rng(4)
        ds = self.toy_classification(rng)
        freq = rng.standard_normal((5, 3))
        phase = rng.uniform(0.0, 2.0 * math.pi, 5)
        outer, bias, report = solve_outer_adam(freq, phase, ds, epochs=0)
        np.testing.assert_array_equal(outer, np.zeros((5, 3)))
        np.testing.assert_array_equal(bias, np.zeros(3))
        assert report.iterations == 0
        assert report.residual_loss == pytest.approx(math.log(3.0), rel=1e-12)

    def test_training_decreases_loss(self):
        rng = np.random.default_rng(5)
        ds = self.toy_classification(rng, m=120)
        freq = rng.standard_normal((20, 3))
        phase = rng.uniform(0.0, 2.0 * math.pi, 20)
        outer, bias, report = solve_outer_adam(freq, phase, ds, epochs=8, lr=1e-2,
                                               batch_size=30)
        assert report.residual_loss < math.log(3.0)
        feats = cosine_feature_matrix(freq, phase, ds.inputs)
        direct = SoftmaxCrossEntropy(3).value(feats @ outer + bias, ds.labels)
        assert report.residual_loss == pytest.approx(direct, rel=1e-12)
        assert report.iterations == 8 * 4

    def test_sequential_batches_without_rng_are_deterministic(self):
        rng = np.random.default_rng(6)
        ds = self.toy_classification(rng)
        freq = rng.standard_normal((7, 3))
        phase = np.zeros(7)
        a = solve_outer_adam(freq, phase, ds, epochs=3)
        b = solve_outer_adam(freq, phase, ds, epochs=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_rng_permutes_batches(self):
        rng = np.random.default_rng(7)
        ds = self.toy_classification(rng, m=90)
        freq = rng.standard_normal((7, 3))
        phase = np.zeros(7)
        plain = solve_outer_adam(freq, phase, ds, epochs=2, batch_size=30)
        shuffled = solve_outer_adam(freq, phase, ds, epochs=2, batch_size=30,
                                    rng=np.random.default_rng(0))
        assert not np.array_equal(plain[0], shuffled[0])

    def test_validation(self):
        rng = np.random.default_rng(8)
        ds = self.toy_classification(rng)
        freq = rng.standard_normal((3, 3))
        with pytest.raises(ValueError):
            solve_outer_adam(freq, np.zeros(3), ds, epochs=-1)
        empty = ClassificationDataset(np.zeros((0, 3)), np.zeros(0, dtype=int), 3)
        with pytest.raises(ValueError):
            solve_outer_adam(freq, np.zeros(3), empty)
