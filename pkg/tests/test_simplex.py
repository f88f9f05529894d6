import numpy as np
import pytest
from scipy import stats

from mixtrain.oracle import project_by_active_sets
from mixtrain.simplex import SimplexVector, project_to_simplex, sample_categorical


def test_projection_matches_support_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(400):
        size = int(rng.integers(1, 9))
        v = rng.standard_normal(size) * float(rng.choice([0.01, 1.0, 100.0]))
        got = project_to_simplex(v).weights
        want = project_by_active_sets(v)
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_projection_worked_example():
    # by hand: support {1, 2}, tau = (1.5 - 1)/2 = 0.25
    out = project_to_simplex(np.array([1.2, 0.3, -0.5]))
    np.testing.assert_allclose(out.weights, [0.95, 0.05, 0.0], atol=1e-12)


def test_projection_fixes_simplex_points():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.dirichlet(np.ones(int(rng.integers(1, 7))))
        np.testing.assert_allclose(project_to_simplex(a).weights, a, atol=1e-12)


def test_projection_far_negative_vector_becomes_vertex():
    out = project_to_simplex(np.array([-5.0, -30.0, -7.0]))
    np.testing.assert_allclose(out.weights, [1.0, 0.0, 0.0], atol=1e-12)


def test_projection_single_entry():
    assert project_to_simplex(np.array([123.0])).weights[0] == 1.0
    assert project_to_simplex(np.array([-9.0])).weights[0] == 1.0


def test_projection_is_euclidean_nearest():
    # any simplex point must be at least as far from v as the projection
    rng = np.random.default_rng(8)
    for _ in range(50):
        v = rng.standard_normal(5) * 3.0
        p = project_to_simplex(v).weights
        for _ in range(20):
            q = rng.dirichlet(np.ones(5))
            assert np.sum((p - v) ** 2) <= np.sum((q - v) ** 2) + 1e-12


def test_projection_rejects_bad_input():
    with pytest.raises(ValueError):
        project_to_simplex(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        project_to_simplex(np.array([np.inf, 0.0]))
    with pytest.raises(ValueError):
        project_to_simplex(np.ones((2, 2)))
    with pytest.raises(ValueError):
        project_to_simplex(np.array([]))


def test_simplex_vector_validation():
    with pytest.raises(ValueError):
        SimplexVector([0.5, -0.1, 0.6])
    with pytest.raises(ValueError):
        SimplexVector([0.5, 0.6])  # sums to 1.1
    with pytest.raises(ValueError):
        SimplexVector([0.5, np.nan])
    with pytest.raises(ValueError):
        SimplexVector([[0.5, 0.5]])
    with pytest.raises(ValueError):
        SimplexVector([])


def test_simplex_vector_normalizes_tiny_drift():
    drifted = np.array([0.3, 0.7]) * (1.0 + 5e-10)
    v = SimplexVector(drifted)
    assert v.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_simplex_vector_is_frozen_and_array_like():
    v = SimplexVector([0.25, 0.75])
    assert len(v) == 2
    assert v[1] == 0.75
    np.testing.assert_array_equal(np.asarray(v), v.weights)
    assert v == SimplexVector([0.25, 0.75])
    assert v != SimplexVector([0.75, 0.25])
    with pytest.raises(ValueError):
        v.weights[0] = 0.5
    assert "0.25" in repr(v)


def test_simplex_vector_exact_keeps_bits():
    rng = np.random.default_rng(4)
    for _ in range(100):
        w = rng.dirichlet(np.ones(6))
        w = w / w.sum()
        kept = SimplexVector.exact(w)
        assert np.array_equal(kept.weights, w)
    with pytest.raises(ValueError):
        SimplexVector.exact([0.5, 0.6])


def test_sample_categorical_point_masses():
    rng = np.random.default_rng(0)
    for k in range(4):
        alpha = np.zeros(4)
        alpha[k] = 1.0
        assert all(sample_categorical(alpha, rng) == k for _ in range(50))


def test_sample_categorical_frequencies():
    alpha = np.array([0.2, 0.3, 0.5])
    rng = np.random.default_rng(123)
    draws = np.array([sample_categorical(alpha, rng) for _ in range(20000)])
    counts = np.bincount(draws, minlength=3)
    expected = alpha * draws.size
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < stats.chi2.ppf(0.999, df=2)


def test_sample_categorical_never_out_of_range():
    # cumulative sums that fall just short of 1 must still return a valid index
    alpha = np.array([0.25, 0.25, 0.25, 0.25]) * (1.0 - 1e-12)
    rng = np.random.default_rng(9)
    draws = [sample_categorical(alpha, rng) for _ in range(1000)]
    assert min(draws) >= 0 and max(draws) <= 3
