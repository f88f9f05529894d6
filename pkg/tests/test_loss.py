import math

import numpy as np
import pytest

from mixtrain.loss import EmpiricalL2, SoftmaxCrossEntropy


def finite_difference(loss, u, y, h=1e-6):
    g = np.zeros_like(u, dtype=float)
    it = np.nditer(u, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        up, dn = u.copy(), u.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (loss.value(up, y) - loss.value(dn, y)) / (2.0 * h)
        it.iternext()
    return g


class TestEmpiricalL2:
    def test_value_matches_manual_mean(self):
        loss = EmpiricalL2()
        u = np.array([1.0, -2.0, 0.5])
        y = np.array([0.0, -1.0, 0.5])
        assert loss.value(u, y) == pytest.approx((1.0 + 1.0 + 0.0) / 3.0)

    def test_zero_at_perfect_fit(self):
        loss = EmpiricalL2()
        y = np.array([3.0, -1.0])
        assert loss.value(y, y) == 0.0
        np.testing.assert_array_equal(loss.functional_gradient(y, y), np.zeros(2))

    def test_gradient_formula_and_fd(self):
        rng = np.random.default_rng(0)
        loss = EmpiricalL2()
        u = rng.standard_normal(7)
        y = rng.standard_normal(7)
        g = loss.functional_gradient(u, y)
        np.testing.assert_allclose(g, 2.0 * (u - y) / 7.0, rtol=1e-15)
        np.testing.assert_allclose(g, finite_difference(loss, u, y), atol=1e-9)

    def test_shape_mismatch_rejected(self):
        loss = EmpiricalL2()
        with pytest.raises(ValueError):
            loss.value(np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError):
            loss.value(np.zeros(0), np.zeros(0))


class TestSoftmaxCrossEntropy:
    def test_value_matches_manual(self):
        loss = SoftmaxCrossEntropy(class_count=3)
        u = np.array([[1.0, 0.0, -1.0], [0.0, 0.0, 0.0]])
        y = np.array([0, 2])
        want = 0.5 * (-math.log(math.e / (math.e + 1.0 + math.e ** -1))
                      - math.log(1.0 / 3.0))
        assert loss.value(u, y) == pytest.approx(want, rel=1e-12)

    def test_uniform_logits_give_log_classes(self):
        loss = SoftmaxCrossEntropy(class_count=5)
        u = np.zeros((4, 5))
        y = np.array([0, 1, 2, 3])
        assert loss.value(u, y) == pytest.approx(math.log(5.0), rel=1e-12)

    def test_gradient_rows_sum_to_zero(self):
        rng = np.random.default_rng(1)
        loss = SoftmaxCrossEntropy(class_count=4)
        u = rng.standard_normal((6, 4))
        y = rng.integers(0, 4, 6)
        g = loss.functional_gradient(u, y)
        np.testing.assert_allclose(g.sum(axis=1), np.zeros(6), atol=1e-16)

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(2)
        loss = SoftmaxCrossEntropy(class_count=3)
        u = 2.0 * rng.standard_normal((5, 3))
        y = rng.integers(0, 3, 5)
        np.testing.assert_allclose(loss.functional_gradient(u, y),
                                   finite_difference(loss, u, y), atol=1e-8)

    def test_stable_at_huge_logits(self):
        loss = SoftmaxCrossEntropy(class_count=2)
        u = np.array([[1e4, 0.0], [-1e4, 0.0]])
        y = np.array([0, 0])
        v = loss.value(u, y)
        assert math.isfinite(v)
        assert v == pytest.approx(1e4 / 2.0, rel=1e-12)  # one confident hit, one miss
        g = loss.functional_gradient(u, y)
        assert np.all(np.isfinite(g))
        np.testing.assert_allclose(g[0], [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(g[1], [-0.5, 0.5], atol=1e-15)

    def test_input_validation(self):
        loss = SoftmaxCrossEntropy(class_count=3)
        with pytest.raises(ValueError):
            loss.value(np.zeros((2, 4)), np.array([0, 1]))
        with pytest.raises(ValueError):
            loss.value(np.zeros((2, 3)), np.array([0, 1, 2]))
        with pytest.raises(ValueError):
            loss.value(np.zeros((2, 3)), np.array([0, 3]))
        with pytest.raises(ValueError):
            loss.value(np.zeros((2, 3)), np.array([-1, 0]))

    def test_gradient_does_not_mutate_input(self):
        loss = SoftmaxCrossEntropy(class_count=2)
        u = np.array([[0.3, -0.3]])
        keep = u.copy()
        loss.functional_gradient(u, np.array([1]))
        np.testing.assert_array_equal(u, keep)
