"""Spherical Gaussian mixtures: ground truth, sampling, second-order structure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, RankDeficiencyError
from .linalg import fix_signs, rng_from, sym_eig_desc

RANK_TOL = 1e-10


@dataclass(frozen=True)
class GmmParams:
    """Spherical mixture ``sum_k w_k N(mu_k, sigma2 I_P)``.

    ``means`` is P x K with one component mean per column.
    """

    weights: np.ndarray
    means: np.ndarray
    sigma2: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        M = np.asarray(self.means, dtype=float)
        if M.ndim != 2 or M.shape[1] != w.size:
            raise ContractError(f"means must be P x K with K={w.size}, got {M.shape}")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ContractError("weights must be strictly positive and sum to 1")
        if not np.isfinite(M).all():
            raise ContractError("means must be finite")
        if self.sigma2 < 0:
            raise ContractError("sigma2 must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", M)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def K(self) -> int:
        return self.weights.size

    @property
    def P(self) -> int:
        return self.means.shape[0]

    def second_moment(self) -> np.ndarray:
        """Dense P x P inter-cluster matrix. For tests; avoid for large P."""
        return (self.means * self.weights) @ self.means.T


@dataclass(frozen=True)
class PopulationSpectrum:
    gamma: np.ndarray   # eigenvalues of M2, descending
    lam: np.ndarray     # gamma + sigma2
    ell: np.ndarray     # gamma / sigma2
    U: np.ndarray       # P x K, orthonormal columns
    sigma2: float


def means_from_gram(P: int, gram: np.ndarray, seed: int) -> np.ndarray:
    """Means whose Gram matrix is ``gram``, placed in a random K-dim subspace."""
    gram = np.asarray(gram, dtype=float)
    K = gram.shape[0]
    if gram.shape != (K, K) or not np.allclose(gram, gram.T, atol=1e-12):
        raise DomainError("gram must be a symmetric K x K matrix")
    if P < K:
        raise DomainError(f"dimension P={P} is smaller than K={K}")
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise DomainError("gram matrix is not positive definite") from exc
    G = rng_from(seed).standard_normal((P, K))
    Q, R = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(R))
    return Q @ L.T


def sample(params: GmmParams, N: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``N`` rows from the mixture. Returns ``(X, labels)``."""
    if N < 1:
        raise ContractError("N must be positive")
    rng = rng_from(seed)
    labels = rng.choice(params.K, size=N, p=params.weights)
    X = params.means.T[labels]
    if params.sigma2 > 0:
        X = X + np.sqrt(params.sigma2) * rng.standard_normal((N, params.P))
    return X, labels


def population_spectrum(params: GmmParams) -> PopulationSpectrum:
    """Top-K eigenpairs of ``M2 = sum_k w_k mu_k mu_k^T``.

    Solved in the K x K reduced space: with ``A = M diag(sqrt(w))`` the nonzero
    spectrum of ``A A^T`` equals that of ``A^T A`` and ``u = A v / sqrt(gamma)``.
    """
    A = params.means * np.sqrt(params.weights)
    eig = sym_eig_desc(A.T @ A)
    gamma = eig.values
    if gamma[-1] <= RANK_TOL:
        raise RankDeficiencyError(f"M2 has rank < K (smallest eigenvalue {gamma[-1]:.3e})")
    U = fix_signs(A @ eig.vectors / np.sqrt(gamma))
    s2 = params.sigma2
    ell = gamma / s2 if s2 > 0 else np.full_like(gamma, np.inf)
    return PopulationSpectrum(gamma=gamma, lam=gamma + s2, ell=ell, U=U, sigma2=s2)


def sample_covariance(X: np.ndarray) -> np.ndarray:
    """Uncentered ``X^T X / N``."""
    X = np.asarray(X, dtype=float)
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def estimate_sigma2(X: np.ndarray) -> float:
    X = np.asarray(X, dtype=float)
    N, P = X.shape
    return float(np.einsum("ij,ij->", X, X) / (N * P))
