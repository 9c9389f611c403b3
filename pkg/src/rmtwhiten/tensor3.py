"""Symmetric order-3 tensors on the whitened space and moment-based GMM recovery."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from . import _kernels
from .errors import ContractError, DegenerateSpectrumError, UnsupportedSizeError
from .linalg import rng_from, sym_eig_desc
from .whitening import WhiteningMap, estimate_corrected, estimate_standard

Variant = Literal["paper", "derived"]

# Pinned by the population-limit check in tests/test_acceptance.py: with
# xi = F x the noise contributes sigma2 * (F F^T)_kk along e_k (x) e_k.
DEFAULT_VARIANT: Variant = "derived"
VARIANTS = ("paper", "derived")
MAX_K = 8
# learn_gmm works on noisy tensors: eigenvector error scales like noise / gap,
# so contractions with a gap below 10% of the spectral radius are redrawn.
LEARN_GAP_TOL = 0.1


def symmetrize(entries: np.ndarray) -> np.ndarray:
    E = np.asarray(entries, dtype=float)
    return (E + E.transpose(0, 2, 1) + E.transpose(1, 0, 2)
            + E.transpose(1, 2, 0) + E.transpose(2, 0, 1) + E.transpose(2, 1, 0)) / 6.0


@dataclass(frozen=True)
class SymTensor3:
    entries: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.entries, dtype=float)
        if E.ndim != 3 or not (E.shape[0] == E.shape[1] == E.shape[2]):
            raise ContractError(f"expected a cubic K x K x K array, got {E.shape}")
        object.__setattr__(self, "entries", E)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.entries - symmetrize(self.entries)), initial=0.0))

    def cubic(self, v: np.ndarray) -> float:
        """``T(v, v, v)``."""
        v = np.asarray(v, dtype=float)
        return float(np.einsum("abc,a,b,c->", self.entries, v, v, v))


class DecompositionResult(NamedTuple):
    vectors: np.ndarray          # K x K, columns v_k
    weights: np.ndarray          # NaN for unreliable components
    contraction_vector: np.ndarray
    gap: float
    residual: float              # ||V^T V - I||_F
    weight_sum: float
    reliable: np.ndarray
    attempts: int


def planted_tensor(weights: np.ndarray, vectors: np.ndarray) -> SymTensor3:
    """``sum_k w_k^{-1/2} v_k^{(x)3}`` for orthonormal columns ``v_k``."""
    w = np.asarray(weights, dtype=float)
    V = np.asarray(vectors, dtype=float)
    if V.shape != (w.size, w.size):
        raise ContractError("vectors must be K x K")
    if np.max(np.abs(V.T @ V - np.eye(w.size))) > 1e-8:
        raise ContractError("vectors are not orthonormal")
    return SymTensor3(np.einsum("k,ak,bk,ck->abc", w ** -0.5, V, V, V))


def multilinear_transform(T: SymTensor3, A: np.ndarray) -> SymTensor3:
    """``T(A^T, A^T, A^T)``: each mode is mapped by ``A`` (K x m, m = T.dim)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != T.dim:
        raise ContractError(f"A has {A.shape[1]} columns but tensor dimension is {T.dim}")
    return SymTensor3(_kernels.multilinear(T.entries, A))


def contract_to_matrix(T: SymTensor3, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (T.dim,):
        raise ContractError("theta dimension mismatch")
    return _kernels.contract(T.entries, theta)


def noise_coefficients(wmap: WhiteningMap, sigma2_hat: float, variant: Variant) -> np.ndarray:
    """Per-coordinate weights of the noise correction in :func:`estimate_m3`."""
    if variant not in VARIANTS:
        raise ContractError(f"unknown coefficient variant {variant!r}")
    active = np.asarray(wmap.active, dtype=bool)
    if variant == "derived":
        coef = sigma2_hat * wmap.row_norms_sq
    elif wmap.kind == "corrected":
        coef = np.array([sigma2_hat / (s.lambda_c * s.psi_c) if s.recoverable else 0.0
                         for s in wmap.spikes])
    else:
        coef = np.full(wmap.K, float(sigma2_hat))
    return np.where(active, coef, 0.0)


def estimate_m3(whitened_data: np.ndarray, wmap: WhiteningMap, sigma2_hat: float,
                variant: Variant | None = None) -> SymTensor3:
    """Noise-debiased third moment of whitened samples.

    Returns ``mean(xi^{(x)3}) - sum_k c_k sym(xi_bar (x) e_k (x) e_k)``, with
    ``c_k`` from :func:`noise_coefficients`. The samples must be independent
    of the ones used to build ``wmap``.
    """
    xi = np.asarray(whitened_data, dtype=float)
    N = xi.shape[0]
    if N == 0:
        raise ContractError("no samples")
    if xi.shape[1] != wmap.K:
        raise ContractError("whitened data dimension does not match the map")
    variant = DEFAULT_VARIANT if variant is None else variant
    raw = _kernels.third_moment_sum(xi) / N
    xbar = xi.mean(axis=0)
    D = np.diag(noise_coefficients(wmap, sigma2_hat, variant))
    corr = (np.einsum("a,bc->abc", xbar, D) + np.einsum("b,ac->abc", xbar, D)
            + np.einsum("c,ab->abc", xbar, D))
    return SymTensor3(symmetrize(raw - corr))


def decompose(T: SymTensor3, seed: int, gap_tol: float = 1e-3,
              max_retries: int = 10) -> DecompositionResult:
    """Orthogonal decomposition through one random contraction.

    ``T(I, I, theta)`` shares its eigenvectors with ``T``; ``theta`` is redrawn
    while the smallest eigenvalue gap is below ``gap_tol`` times the largest
    eigenvalue magnitude. (Measuring against max - min would never trigger for
    K = 2, where the only gap is the whole range.)
    """
    K = T.dim
    if K > MAX_K:
        raise UnsupportedSizeError(f"K <= {MAX_K} required")
    rng = rng_from(seed)
    gaps = []
    for attempt in range(1, max_retries + 2):
        theta = rng.standard_normal(K)
        theta /= np.linalg.norm(theta)
        eig = sym_eig_desc(contract_to_matrix(T, theta))
        if K == 1:
            gap, ok = np.inf, abs(eig.values[0]) > 0
        else:
            radius = float(np.max(np.abs(eig.values)))
            gap = float(np.min(-np.diff(eig.values)))
            ok = radius > 0 and gap > 0 and gap >= gap_tol * radius
        gaps.append(gap)
        if ok:
            break
    else:
        raise DegenerateSpectrumError(
            f"contraction spectrum stayed degenerate after {max_retries + 1} draws",
            {"gaps": gaps, "gap_tol": gap_tol},
        )
    V = eig.vectors.copy()
    cub = np.array([T.cubic(V[:, k]) for k in range(K)])
    V *= np.where(cub < 0, -1.0, 1.0)
    cub = np.abs(cub)
    scale = max(float(np.max(cub)), np.finfo(float).tiny)
    reliable = cub > 1e-10 * scale
    weights = np.where(reliable, 1.0 / np.where(reliable, cub, 1.0) ** 2, np.nan)
    return DecompositionResult(
        vectors=V,
        weights=weights,
        contraction_vector=theta,
        gap=float(gap),
        residual=float(np.linalg.norm(V.T @ V - np.eye(K))),
        weight_sum=float(np.nansum(weights)),
        reliable=reliable,
        attempts=attempt,
    )


class LearnResult(NamedTuple):
    means: np.ndarray     # P x K
    weights: np.ndarray   # K
    sigma2_hat: float
    diagnostics: dict


def learn_gmm(data: np.ndarray, K: int, use_corrected: bool,
              coefficient_variant: Variant | None = None, seed: int = 0,
              gap_tol: float = LEARN_GAP_TOL) -> LearnResult:
    """Whiten on the first half of ``data``, estimate and decompose the third
    moment on the second half, then map the components back.

    Components the decomposition cannot resolve (zero cubic value, e.g. a
    deactivated spike) are returned as zero vectors with NaN weight.
    """
    X = np.asarray(data, dtype=float)
    half = X.shape[0] // 2
    first, second = X[:half], X[half:]
    wmap = estimate_corrected(first, K) if use_corrected else estimate_standard(first, K)
    variant = DEFAULT_VARIANT if coefficient_variant is None else coefficient_variant
    T = estimate_m3(wmap.apply(second), wmap, wmap.sigma2_used, variant)
    dec = decompose(T, seed, gap_tol=gap_tol)
    scale = np.where(dec.reliable, np.sqrt(np.where(dec.reliable, dec.weights, 1.0)), np.inf)
    means = wmap.unwhiten @ (dec.vectors / scale)
    return LearnResult(
        means=means,
        weights=dec.weights,
        sigma2_hat=wmap.sigma2_used,
        diagnostics={
            "kind": wmap.kind,
            "variant": variant,
            "active": wmap.active.copy(),
            "reliable": dec.reliable.copy(),
            "gap": dec.gap,
            "attempts": dec.attempts,
            "weight_sum": dec.weight_sum,
            "tensor": T,
        },
    )
