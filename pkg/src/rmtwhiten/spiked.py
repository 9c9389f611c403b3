"""Closed-form spiked-covariance limits and their inverses.

All quantities are for a sample covariance of ``N`` samples in dimension
``P`` with aspect ratio ``c = P/N``, noise variance ``sigma2`` and spikes
``ell_k = gamma_k / sigma2``. A spike is detectable iff ``ell > sqrt(c)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .gmm import PopulationSpectrum

# NaN marks an alignment whose normalising norms vanish.
UNDEFINED = float("nan")


@dataclass(frozen=True)
class SpikeInfo:
    ell: float
    lam: float
    beta: float
    psi: float
    zeta: float
    lambda_tilde: float
    supercritical: bool


@dataclass(frozen=True)
class CorrectedSpike:
    ell_c: float
    lambda_c: float
    beta_c: float
    psi_c: float
    recoverable: bool


def overlap_factor(ell: float, c: float) -> float:
    """``1 - ((beta-1)/beta) (1+ell)/ell`` with ``beta = 1 + c/ell``."""
    beta = 1.0 + c / ell
    return 1.0 - (beta - 1.0) / beta * (1.0 + ell) / ell


def spike_forward(ell: float, sigma2: float, c: float) -> SpikeInfo:
    """Almost-sure limits of the sample eigenvalue and eigenvector overlap."""
    if ell < 0 or sigma2 <= 0 or c <= 0:
        raise DomainError("need ell >= 0, sigma2 > 0, c > 0")
    lam = sigma2 * (1.0 + ell)
    sup = ell > math.sqrt(c)
    if sup:
        beta = 1.0 + c / ell
        psi = overlap_factor(ell, c)
        return SpikeInfo(ell, lam, beta, psi, psi, beta * lam, True)
    beta = 1.0 + c / ell if ell > 0 else math.inf
    edge = sigma2 * (1.0 + math.sqrt(c)) ** 2
    return SpikeInfo(ell, lam, beta, 0.0, 0.0, edge, False)


def spike_invert(lambda_hat: float, sigma2_hat: float, c: float) -> CorrectedSpike:
    """Recover the population spike from an observed outlier eigenvalue.

    Takes the positive root of ``ell^2 + (1 + c - lambda_hat/sigma2_hat) ell + c = 0``.
    Eigenvalues at or inside the bulk edge give ``recoverable=False`` with
    ``psi_c = 0``.
    """
    if lambda_hat <= 0 or sigma2_hat <= 0:
        raise DomainError("need lambda_hat > 0 and sigma2_hat > 0")
    r = lambda_hat / sigma2_hat - (1.0 + c)
    disc = r * r - 4.0 * c
    # ell_c > sqrt(c) iff r > 0 and the two roots are distinct
    tol = 16 * np.finfo(float).eps * (r * r + 4.0 * c)
    if r <= 0 or disc <= tol:
        ell_c = 0.5 * (r + math.sqrt(max(disc, 0.0))) if disc >= -tol else math.nan
        return CorrectedSpike(ell_c, math.nan, math.nan, 0.0, False)
    ell_c = 0.5 * (r + math.sqrt(disc))
    beta_c = 1.0 + c / ell_c
    psi_c = 1.0 - (beta_c - 1.0) / beta_c * (1.0 + ell_c) / ell_c
    return CorrectedSpike(ell_c, sigma2_hat * (1.0 + ell_c), beta_c, psi_c, True)


def phi_scaling(corrected: Sequence[CorrectedSpike], sigma2_hat: float, c: float) -> np.ndarray:
    """Diagonal of the corrected whitening scale, zero for unrecoverable spikes."""
    out = np.zeros(len(corrected))
    for k, s in enumerate(corrected):
        if not s.recoverable:
            continue
        excess = s.lambda_c - sigma2_hat
        assert excess > 0 and s.psi_c > 0, "recoverable spike with nonpositive scale"
        out[k] = 1.0 / math.sqrt(excess * s.psi_c)
    return out


def critical_snr(gamma: np.ndarray, c: float) -> np.ndarray:
    """SNR ``1/sigma2`` at which ``gamma_k / sigma2`` reaches ``sqrt(c)``.

    Equal to ``(1 + sqrt(c)) / lambda_k`` with ``lambda_k`` evaluated at the
    threshold noise level.
    """
    return math.sqrt(c) / np.asarray(gamma, dtype=float)


def cosine_matrix(G: np.ndarray) -> np.ndarray:
    """``|G_ij| / sqrt(G_ii G_jj)``; NaN wherever a diagonal entry is not positive."""
    G = np.asarray(G, dtype=float)
    diag = np.diag(G).copy()
    ok = diag > 0
    root = np.sqrt(np.where(ok, diag, 1.0))
    rho = np.abs(G) / np.outer(root, root)
    rho[~ok, :] = UNDEFINED
    rho[:, ~ok] = UNDEFINED
    idx = np.flatnonzero(ok)
    rho[idx, idx] = 1.0
    return rho


def alignment_weights(spectrum: PopulationSpectrum, c: float) -> np.ndarray:
    """``d_k = 1{ell_k > sqrt(c)} psi_k / (lambda_tilde_k - sigma2)``."""
    d = np.zeros(spectrum.gamma.size)
    for k, ell in enumerate(spectrum.ell):
        info = spike_forward(float(ell), spectrum.sigma2, c)
        if info.supercritical:
            d[k] = info.psi / (info.lambda_tilde - spectrum.sigma2)
    return d


def predicted_alignment(spectrum: PopulationSpectrum, means: np.ndarray, sigma2: float,
                        c: float) -> tuple[np.ndarray, np.ndarray]:
    """Limits of the standard-whitened mean dot products and their cosines.

    Returns ``(G, rho)`` where ``G[i, j]`` is the limit of ``<W_hat mu_i, W_hat mu_j>``
    and ``rho`` its absolute cosine (NaN where undefined).
    """
    if not np.isclose(sigma2, spectrum.sigma2, rtol=1e-12, atol=0):
        raise DomainError("sigma2 does not match the spectrum")
    d = alignment_weights(spectrum, c)
    proj = spectrum.U.T @ np.asarray(means, dtype=float)  # K x K, coordinates u_k^T mu_j
    G = proj.T @ (d[:, None] * proj)
    return G, cosine_matrix(G)


def predicted_corrected_dots(spectrum: PopulationSpectrum, means: np.ndarray,
                             c: float) -> tuple[np.ndarray, np.ndarray]:
    """Limits ``mu_i^T U H Gamma^{-1} U^T mu_j`` under corrected whitening.

    ``H`` keeps only supercritical spikes. Returns ``(G, rho)`` as in
    :func:`predicted_alignment`.
    """
    active = spectrum.ell > math.sqrt(c)
    h = np.where(active, 1.0 / spectrum.gamma, 0.0)
    proj = spectrum.U.T @ np.asarray(means, dtype=float)
    G = proj.T @ (h[:, None] * proj)
    return G, cosine_matrix(G)


def k2_closed_form(ell1: float, ell2: float, c: float) -> float:
    """Residual alignment limit for two equal-weight unit-norm means."""
    root_c = math.sqrt(c)
    if ell1 <= root_c or ell2 <= root_c:
        raise DomainError("closed form requires both spikes above sqrt(c)")

    def q(ell):
        return (ell**4 - c * ell**2) / (ell * (ell + c) * (ell**2 + c * ell + c))

    q1, q2 = q(ell1), q(ell2)
    return (q1 - q2) / (q1 + q2)
