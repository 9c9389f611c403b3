"""Population, standard and RMT-corrected whitening maps.

Each map is a K x P ``forward`` matrix whose rows are scaled eigenvectors,
plus a P x K ``unwhiten`` matrix that inverts it on the retained coordinates.
Spikes that cannot be used are deactivated: their row of ``forward`` and
column of ``unwhiten`` are zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ContractError, DegenerateMapError
from .gmm import GmmParams, estimate_sigma2, population_spectrum, sample_covariance
from .linalg import EigenPairs, sym_eig_desc
from .spiked import CorrectedSpike, cosine_matrix, phi_scaling, spike_invert

Kind = Literal["population", "standard", "corrected"]


@dataclass(frozen=True)
class WhiteningMap:
    kind: Kind
    forward: np.ndarray
    unwhiten: np.ndarray
    sigma2_used: float
    active: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    spikes: tuple = ()
    c: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.forward.shape[0]

    @property
    def row_norms_sq(self) -> np.ndarray:
        """Diagonal of ``forward @ forward.T`` (the rows are orthogonal)."""
        return np.einsum("kp,kp->k", self.forward, self.forward)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Whiten the rows of an N x P data matrix."""
        return np.asarray(X, dtype=float) @ self.forward.T


def population_whitening(params: GmmParams) -> WhiteningMap:
    spec = population_spectrum(params)
    scale = np.sqrt(spec.gamma)
    return WhiteningMap(
        kind="population",
        forward=spec.U.T / scale[:, None],
        unwhiten=spec.U * scale,
        sigma2_used=params.sigma2,
        active=np.ones(params.K, dtype=bool),
        eigvals=spec.lam,
        eigvecs=spec.U,
    )


def empirical_spectrum(X: np.ndarray, K: int) -> tuple[float, EigenPairs]:
    """Noise-variance estimate and the K leading eigenpairs of the sample covariance."""
    X = np.asarray(X, dtype=float)
    N, P = X.shape
    if N <= K:
        raise ContractError(f"need more than K={K} samples, got N={N}")
    if K > P:
        raise ContractError(f"K={K} exceeds the dimension P={P}")
    return estimate_sigma2(X), sym_eig_desc(sample_covariance(X), k=K)


def _diagnose(eigvals, sigma2_hat, c) -> tuple[CorrectedSpike, ...]:
    if sigma2_hat <= 0:
        return tuple(CorrectedSpike(math.nan, math.nan, math.nan, 0.0, False) for _ in eigvals)
    return tuple(
        spike_invert(float(lam), sigma2_hat, c) if lam > 0
        else CorrectedSpike(math.nan, math.nan, math.nan, 0.0, False)
        for lam in eigvals
    )


def standard_from_spectrum(sigma2_hat: float, eig: EigenPairs, c: float) -> WhiteningMap:
    """``Gamma_hat^{-1/2} U_hat^T`` with ``Gamma_hat = diag(lambda_hat - sigma2_hat)``."""
    values, U = eig
    excess = values - sigma2_hat
    active = excess > 0
    spikes = _diagnose(values, sigma2_hat, c)
    if not active.any():
        raise DegenerateMapError(
            "no sample eigenvalue exceeds the noise variance estimate",
            {"eigvals": values.tolist(), "sigma2_hat": sigma2_hat},
        )
    root = np.sqrt(np.where(active, excess, 0.0))
    inv = np.divide(1.0, root, out=np.zeros_like(root), where=active)
    return WhiteningMap(
        kind="standard",
        forward=U.T * inv[:, None],
        unwhiten=U * root,
        sigma2_used=sigma2_hat,
        active=active,
        eigvals=values,
        eigvecs=U,
        spikes=spikes,
        c=c,
    )


def corrected_from_spectrum(sigma2_hat: float, eig: EigenPairs, c: float) -> WhiteningMap:
    """``Phi U_hat^T`` with the spike-by-spike RMT rescaling ``Phi``."""
    values, U = eig
    spikes = _diagnose(values, sigma2_hat, c)
    phi = phi_scaling(spikes, sigma2_hat, c)
    active = np.array([s.recoverable for s in spikes])
    if not active.any():
        raise DegenerateMapError(
            "no spike lies above the bulk edge; corrected map is empty",
            {
                "eigvals": values.tolist(),
                "sigma2_hat": sigma2_hat,
                "bulk_edge": sigma2_hat * (1 + math.sqrt(c)) ** 2,
                "ell_c": [s.ell_c for s in spikes],
            },
        )
    inv = np.divide(1.0, phi, out=np.zeros_like(phi), where=active)
    return WhiteningMap(
        kind="corrected",
        forward=U.T * phi[:, None],
        unwhiten=U * inv,
        sigma2_used=sigma2_hat,
        active=active,
        eigvals=values,
        eigvecs=U,
        spikes=spikes,
        c=c,
    )


def estimate_standard(X: np.ndarray, K: int) -> WhiteningMap:
    sigma2_hat, eig = empirical_spectrum(X, K)
    N, P = np.shape(X)
    return standard_from_spectrum(sigma2_hat, eig, P / N)


def estimate_corrected(X: np.ndarray, K: int) -> WhiteningMap:
    sigma2_hat, eig = empirical_spectrum(X, K)
    N, P = np.shape(X)
    return corrected_from_spectrum(sigma2_hat, eig, P / N)


def whitened_dots(wmap: WhiteningMap, means: np.ndarray) -> np.ndarray:
    """K x K matrix of ``<F mu_i, F mu_j>``."""
    Z = wmap.forward @ np.asarray(means, dtype=float)
    return Z.T @ Z


def residual_alignment(wmap: WhiteningMap, means: np.ndarray) -> np.ndarray:
    """Absolute cosines between whitened means; NaN where a whitened mean is zero."""
    return cosine_matrix(whitened_dots(wmap, means))


def eigvec_alignment(data_eigvecs: np.ndarray, true_eigvecs: np.ndarray) -> np.ndarray:
    """Squared overlaps ``(u_hat_k^T u_k)^2`` column by column."""
    A = np.asarray(data_eigvecs, dtype=float)
    B = np.asarray(true_eigvecs, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise ContractError("column counts differ")
    return np.einsum("pk,pk->k", A, B) ** 2
