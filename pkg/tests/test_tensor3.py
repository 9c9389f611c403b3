import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmtwhiten import gmm, tensor3 as t3, whitening as wh
from rmtwhiten.errors import ContractError, DegenerateSpectrumError
from rmtwhiten.linalg import match_permutation


def random_orthonormal(K, rng):
    Q, R = np.linalg.qr(rng.normal(size=(K, K)))
    return Q * np.sign(np.diag(R))


def brute_third_moment(xi):
    N, K = xi.shape
    out = np.zeros((K, K, K))
    for a, b, c in itertools.product(range(K), repeat=3):
        out[a, b, c] = np.sum(xi[:, a] * xi[:, b] * xi[:, c]) / N
    return out


def test_planted_canonical():
    T = t3.planted_tensor(np.array([0.5, 0.5]), np.eye(2))
    expect = np.zeros((2, 2, 2))
    expect[0, 0, 0] = expect[1, 1, 1] = np.sqrt(2)
    np.testing.assert_allclose(T.entries, expect)
    assert t3.planted_tensor(np.array([1.0]), np.eye(1)).entries.item() == 1.0


def test_planted_rejects_non_orthonormal():
    with pytest.raises(ContractError):
        t3.planted_tensor(np.array([0.5, 0.5]), np.array([[1.0, 0.5], [0.0, 1.0]]))


@pytest.mark.parametrize("seed", range(5))
def test_planted_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    K = 3
    w = rng.dirichlet(np.ones(K))
    V, Q = random_orthonormal(K, rng), random_orthonormal(K, rng)
    lhs = t3.planted_tensor(w, Q @ V).entries
    rhs = t3.multilinear_transform(t3.planted_tensor(w, V), Q).entries
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_multilinear_basic():
    rng = np.random.default_rng(0)
    T = t3.SymTensor3(t3.symmetrize(rng.normal(size=(3, 3, 3))))
    np.testing.assert_allclose(t3.multilinear_transform(T, np.eye(3)).entries, T.entries, atol=1e-14)
    np.testing.assert_allclose(t3.multilinear_transform(T, 2 * np.eye(3)).entries, 8 * T.entries, atol=1e-13)


def test_multilinear_rank_one_pushforward():
    e1 = np.zeros((4, 4, 4))
    e1[0, 0, 0] = 1.0
    A = np.random.default_rng(1).normal(size=(2, 4))
    a = A[:, 0]
    out = t3.multilinear_transform(t3.SymTensor3(e1), A).entries
    np.testing.assert_allclose(out, np.einsum("a,b,c->abc", a, a, a), atol=1e-14)


def test_multilinear_dimension_mismatch():
    with pytest.raises(ContractError):
        t3.multilinear_transform(t3.SymTensor3(np.zeros((3, 3, 3))), np.eye(2))


def test_contract_examples():
    w = np.array([0.25, 0.75])
    T = t3.planted_tensor(w, np.eye(2))
    np.testing.assert_allclose(t3.contract_to_matrix(T, np.array([1.0, 0.0])), [[2.0, 0], [0, 0]])
    np.testing.assert_array_equal(t3.contract_to_matrix(T, np.zeros(2)), 0)
    rng = np.random.default_rng(3)
    S = t3.SymTensor3(t3.symmetrize(rng.normal(size=(3, 3, 3))))
    a, b, alpha = rng.normal(size=3), rng.normal(size=3), 1.7
    np.testing.assert_allclose(t3.contract_to_matrix(S, alpha * a + b),
                               alpha * t3.contract_to_matrix(S, a) + t3.contract_to_matrix(S, b),
                               atol=1e-12)


@pytest.fixture(scope="module")
def pop_setup():
    M = gmm.means_from_gram(20, np.array([[1, .5], [.5, 1]]), 4)
    p = gmm.GmmParams(np.array([0.567, 0.433]), M, 0.25)
    return p, wh.population_whitening(p)


def test_m3_zero_noise_is_plain_third_moment(pop_setup):
    p, W = pop_setup
    X, _ = gmm.sample(p, 500, 5)
    xi = W.apply(X)
    T = t3.estimate_m3(xi, W, 0.0)
    np.testing.assert_allclose(T.entries, brute_third_moment(xi), atol=1e-12)


def test_m3_noiseless_exact_proportions(pop_setup):
    p, W = pop_setup
    counts = np.array([567, 433])
    X = np.repeat(p.means.T, counts, axis=0)
    T = t3.estimate_m3(W.apply(X), W, 0.0)
    Z = W.forward @ p.means
    expect = np.einsum("k,ak,bk,ck->abc", p.weights, Z, Z, Z)
    np.testing.assert_allclose(T.entries, expect, atol=1e-12)
    # same thing written with the orthonormal v_k
    np.testing.assert_allclose(T.entries, t3.planted_tensor(p.weights, Z * np.sqrt(p.weights)).entries,
                               atol=1e-10)


def test_m3_symmetry_and_row_permutation(pop_setup):
    p, W = pop_setup
    X, _ = gmm.sample(p, 2000, 6)
    xi = W.apply(X)
    for variant in t3.VARIANTS:
        T = t3.estimate_m3(xi, W, 0.25, variant)
        assert T.asymmetry() == 0.0
        perm = np.random.default_rng(0).permutation(len(xi))
        T2 = t3.estimate_m3(xi[perm], W, 0.25, variant)
        np.testing.assert_allclose(T2.entries, T.entries, atol=1e-12)


def test_m3_naturality_without_correction():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(300, 4)) + 0.3
    A = rng.normal(size=(2, 4))
    ident = wh.WhiteningMap("population", np.eye(4), np.eye(4), 0.0, np.ones(4, bool), np.ones(4), np.eye(4))
    mapped = wh.WhiteningMap("population", A, np.zeros((4, 2)), 0.0, np.ones(2, bool), np.ones(2), np.eye(4, 2))
    lhs = t3.estimate_m3(X @ A.T, mapped, 0.0).entries
    rhs = t3.multilinear_transform(t3.estimate_m3(X, ident, 0.0), A).entries
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_m3_coefficients(pop_setup):
    p, W = pop_setup
    np.testing.assert_allclose(t3.noise_coefficients(W, 0.25, "paper"), 0.25)
    spec = gmm.population_spectrum(p)
    np.testing.assert_allclose(t3.noise_coefficients(W, 0.25, "derived"), 0.25 / spec.gamma)
    with pytest.raises(ContractError):
        t3.noise_coefficients(W, 0.25, "bogus")


def test_m3_corrected_coefficients():
    M = gmm.means_from_gram(200, np.array([[1, .5], [.5, 1]]), 2)
    p = gmm.GmmParams(np.array([0.5, 0.5]), M, 0.1)
    X, _ = gmm.sample(p, 1000, 3)
    m = wh.estimate_corrected(X, 2)
    s2 = m.sigma2_used
    paper = [s2 / (s.lambda_c * s.psi_c) for s in m.spikes]
    derived = [s2 / ((s.lambda_c - s2) * s.psi_c) for s in m.spikes]
    np.testing.assert_allclose(t3.noise_coefficients(m, s2, "paper"), paper)
    np.testing.assert_allclose(t3.noise_coefficients(m, s2, "derived"), derived, rtol=1e-12)


def test_m3_rejects_empty(pop_setup):
    _, W = pop_setup
    with pytest.raises(ContractError):
        t3.estimate_m3(np.zeros((0, 2)), W, 0.1)


def _assert_recovers(w, V, res, tol):
    perm, err = match_permutation(list(res.vectors.T), list(V.T))
    assert np.max(np.sqrt(err)) <= tol
    np.testing.assert_allclose(res.weights[list(perm)], w, atol=tol)


def test_decompose_canonical():
    w = np.array([0.5, 0.5])
    res = t3.decompose(t3.planted_tensor(w, np.eye(2)), seed=1)
    _assert_recovers(w, np.eye(2), res, 1e-10)


def test_decompose_unequal_weights():
    w = np.array([0.567, 0.433])
    V = random_orthonormal(2, np.random.default_rng(8))
    res = t3.decompose(t3.planted_tensor(w, V), seed=2)
    _assert_recovers(w, V, res, 1e-10)
    assert res.residual < 1e-12


def test_decompose_zero_tensor():
    with pytest.raises(DegenerateSpectrumError):
        t3.decompose(t3.SymTensor3(np.zeros((2, 2, 2))), seed=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_decompose_inverts_planted(K, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.05, 1.0, size=K)
    V = random_orthonormal(K, rng)
    T = t3.planted_tensor(w, V)
    res = t3.decompose(T, seed)
    _assert_recovers(w, V, res, 1e-9)
    for k in range(K):
        assert T.cubic(V[:, k]) == pytest.approx(w[k] ** -0.5, rel=1e-12)


def _classical(seed=2):
    M = gmm.means_from_gram(100, np.array([[1, .5], [.5, 1]]), 1)
    p = gmm.GmmParams(np.array([0.5, 0.5]), M, 0.1)
    X, _ = gmm.sample(p, 100_000, seed)
    return p, X


@pytest.mark.parametrize("corrected", [False, True])
def test_learn_gmm_classical_regime(corrected):
    p, X = _classical()
    res = t3.learn_gmm(X, 2, corrected, seed=3)
    _, err = match_permutation(list(res.means.T), list(p.means.T))
    assert np.all(err < 0.01)
    np.testing.assert_allclose(np.sort(res.weights), [0.5, 0.5], atol=0.05)
    assert res.diagnostics["variant"] == t3.DEFAULT_VARIANT


def test_paper_coefficient_is_biased_in_classical_regime():
    p, X = _classical()
    errs = {}
    for v in t3.VARIANTS:
        res = t3.learn_gmm(X, 2, False, v, seed=3)
        errs[v] = match_permutation(list(res.means.T), list(p.means.T))[1].mean()
    assert errs["derived"] < 0.01 < errs["paper"]


def test_learn_gmm_degenerate_below_threshold():
    M = gmm.means_from_gram(500, np.array([[1, .5], [.5, 1]]), 1)
    p = gmm.GmmParams(np.array([0.5, 0.5]), M, 10.0)
    X, _ = gmm.sample(p, 5000, 2)
    from rmtwhiten.errors import DegenerateMapError
    with pytest.raises(DegenerateMapError):
        t3.learn_gmm(X, 2, True)
    res = t3.learn_gmm(X, 2, False)
    _, err = match_permutation(list(res.means.T), list(p.means.T))
    assert err.mean() > 0.5
