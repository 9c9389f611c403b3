import numpy as np
import pytest

from rmtwhiten import gmm
from rmtwhiten.errors import DomainError, RankDeficiencyError


def two_means(cos_theta, P=40, seed=0):
    return gmm.means_from_gram(P, np.array([[1.0, cos_theta], [cos_theta, 1.0]]), seed)


def test_means_from_identity_gram_are_orthonormal():
    M = gmm.means_from_gram(50, np.eye(2), 1)
    np.testing.assert_allclose(M.T @ M, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("cos", [0.25, 0.5])
def test_means_from_gram_reproduce_dot_products(cos):
    M = two_means(cos, P=500, seed=3)
    np.testing.assert_allclose(M.T @ M, [[1, cos], [cos, 1]], atol=1e-8)


def test_means_from_gram_deterministic_and_random_subspace():
    np.testing.assert_array_equal(two_means(0.3, seed=4), two_means(0.3, seed=4))
    assert not np.allclose(two_means(0.3, seed=4), two_means(0.3, seed=5))


def test_means_from_gram_rejects_indefinite():
    with pytest.raises(DomainError):
        gmm.means_from_gram(10, np.array([[1.0, 2.0], [2.0, 1.0]]), 0)


def test_params_validation():
    with pytest.raises(ValueError):
        gmm.GmmParams(np.array([0.5, 0.6]), np.zeros((3, 2)), 1.0)
    with pytest.raises(ValueError):
        gmm.GmmParams(np.array([1.0, 0.0]), np.zeros((3, 2)), 1.0)


def test_noiseless_single_component():
    mu = np.arange(4.0)[:, None]
    X, labels = gmm.sample(gmm.GmmParams(np.array([1.0]), mu, 0.0), 7, 9)
    np.testing.assert_array_equal(X, np.tile(mu.T, (7, 1)))
    assert np.all(labels == 0)


def test_label_frequencies():
    p = gmm.GmmParams(np.array([0.567, 0.433]), two_means(0.25), 1.0)
    _, labels = gmm.sample(p, 5000, 1)
    assert abs(np.mean(labels == 0) - 0.567) < 0.02


def test_sample_mean_concentrates():
    P, N, s2 = 100, 4000, 0.5
    p = gmm.GmmParams(np.array([0.3, 0.7]), two_means(0.1, P=P), s2)
    X, _ = gmm.sample(p, N, 2)
    err = np.linalg.norm(X.mean(0) - p.means @ p.weights)
    assert err < 3 * np.sqrt(s2) * np.sqrt(P / N)


def test_sample_is_reproducible():
    p = gmm.GmmParams(np.array([0.5, 0.5]), two_means(0.1), 1.0)
    a, la = gmm.sample(p, 50, 8)
    b, lb = gmm.sample(p, 50, 8)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(la, lb)


@pytest.mark.parametrize("cos", [0.0, 0.25, 0.5, 0.9])
def test_example_two_component_spectrum(cos):
    s2 = 0.25
    p = gmm.GmmParams(np.array([0.5, 0.5]), two_means(cos), s2)
    spec = gmm.population_spectrum(p)
    half = np.arccos(cos) / 2
    np.testing.assert_allclose(spec.gamma, [np.cos(half) ** 2, np.sin(half) ** 2], atol=1e-12)
    np.testing.assert_allclose(spec.lam, spec.gamma + s2)
    np.testing.assert_allclose(spec.lam, s2 * (1 + spec.ell))


def test_example_ell_values():
    spec = gmm.population_spectrum(gmm.GmmParams(np.array([0.5, 0.5]), two_means(0.25), 0.25))
    np.testing.assert_allclose(spec.gamma, [0.625, 0.375], atol=1e-12)
    np.testing.assert_allclose(spec.ell, [2.5, 1.5], atol=1e-12)


def test_reduced_spectrum_matches_dense():
    P = 30
    rng = np.random.default_rng(0)
    w = np.array([0.2, 0.3, 0.5])
    M = gmm.means_from_gram(P, np.array([[1, .3, .1], [.3, 2, .4], [.1, .4, 1.5]]), 7)
    p = gmm.GmmParams(w, M, 0.7)
    spec = gmm.population_spectrum(p)
    np.testing.assert_allclose(spec.U.T @ spec.U, np.eye(3), atol=1e-10)
    assert spec.gamma.sum() == pytest.approx(np.sum(w * np.sum(M ** 2, 0)), abs=1e-10)
    Sigma = p.second_moment() + p.sigma2 * np.eye(P)
    dense = np.sort(np.linalg.eigvalsh(Sigma))[::-1]
    np.testing.assert_allclose(dense[:3], spec.lam, atol=1e-10)
    np.testing.assert_allclose(dense[3:], p.sigma2, atol=1e-10)
    # eigenvectors agree with the dense M2
    np.testing.assert_allclose(p.second_moment() @ spec.U, spec.U * spec.gamma, atol=1e-10)


def test_rank_deficient_means():
    M = np.zeros((10, 2))
    M[0] = 1.0  # collinear means
    with pytest.raises(RankDeficiencyError):
        gmm.population_spectrum(gmm.GmmParams(np.array([0.5, 0.5]), M, 1.0))


def test_sample_covariance_single_row():
    x = np.array([[1.0, -2.0, 3.0]])
    np.testing.assert_allclose(gmm.sample_covariance(x), np.outer(x, x))


def test_sample_covariance_orthogonal_rows():
    P = 4
    X = np.sqrt(P) * np.eye(P)
    S = gmm.sample_covariance(X)
    assert np.trace(S) == pytest.approx(P)
    np.testing.assert_allclose(S, np.eye(P))


def test_sample_covariance_low_dimension_lln():
    N = 200_000
    p = gmm.GmmParams(np.array([0.4, 0.6]), gmm.means_from_gram(5, np.array([[1, .2], [.2, 1]]), 2), 0.5)
    X, _ = gmm.sample(p, N, 3)
    Sigma = p.second_moment() + p.sigma2 * np.eye(5)
    assert np.max(np.abs(gmm.sample_covariance(X) - Sigma)) < 5 / np.sqrt(N)


def test_sigma2_estimator():
    assert gmm.estimate_sigma2(np.zeros((3, 4))) == 0.0
    rng = np.random.default_rng(5)
    assert abs(gmm.estimate_sigma2(rng.standard_normal((5000, 500))) - 1.0) < 0.02


def test_sigma2_estimator_bias_is_order_one_over_p():
    P, N, s2 = 500, 5000, 0.5
    p = gmm.GmmParams(np.array([0.5, 0.5]), two_means(0.25, P=P), s2)
    X, _ = gmm.sample(p, N, 4)
    est = gmm.estimate_sigma2(X)
    # E[||x||^2 / P] = sigma2 + 1/P for unit-norm means
    assert abs(est - (s2 + 1 / P)) < 3 * s2 * np.sqrt(2 / (N * P))
    assert abs(est - s2) <= 1 / P + 3 * s2 * np.sqrt(2 / (N * P))
