"""Dense linear-algebra primitives: ordered symmetric eigendecomposition,
seeded Gaussian sampling and exhaustive permutation matching."""
from __future__ import annotations

import itertools
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import ContractError, NumericalError, UnsupportedSizeError

SYMMETRY_RTOL = 1e-10
MAX_MATCH_K = 8


class EigenPairs(NamedTuple):
    values: np.ndarray   # descending
    vectors: np.ndarray  # columns aligned with values


def _check_symmetric(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S))) if S.size else 1.0)
    asym = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if asym > SYMMETRY_RTOL * scale:
        raise ContractError(f"matrix is not symmetric (max |S - S^T| = {asym:.3e})")
    return S


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that the largest-magnitude entry of each is positive.

    Ties between equal magnitudes go to the lowest index (``argmax`` order).
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _order_ties(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    # equal eigenvalues: order columns by descending lexicographic order
    tol = 1e-12 * float(np.max(np.abs(values)))
    order = np.arange(values.size)
    i = 0
    while i < values.size:
        j = i + 1
        while j < values.size and values[i] - values[j] <= tol:
            j += 1
        if j - i > 1:
            block = sorted(range(i, j), key=lambda c: tuple(vectors[:, c]), reverse=True)
            order[i:j] = block
        i = j
    return order


def sym_eig_desc(S: np.ndarray, k: int | None = None) -> EigenPairs:
    """Eigendecomposition of a real symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    S : (m, m) array
        Symmetric input (relative asymmetry at most 1e-10).
    k : int, optional
        Only compute the ``k`` leading eigenpairs. The full spectrum is
        returned when omitted.

    Returns
    -------
    EigenPairs
        Values in descending order and unit eigenvectors as columns, each
        column sign-fixed so its largest-magnitude coordinate is positive.
    """
    S = _check_symmetric(S)
    m = S.shape[0]
    try:
        if k is None or k >= m:
            values, vectors = np.linalg.eigh(S)
        else:
            if k < 1:
                raise ContractError("k must be at least 1")
            values, vectors = scipy.linalg.eigh(S, subset_by_index=[m - k, m - 1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"symmetric eigensolver did not converge for {m}x{m} input: {exc}") from exc
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = fix_signs(vectors[:, order])
    # tie blocks agree to ~1e-12, so only the vectors are permuted
    return EigenPairs(values, vectors[:, _order_ties(values, vectors)])


def rng_from(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and an optional spawn path.

    Distinct ``keys`` tuples give statistically independent streams, which is
    how per-replicate seeds are derived.
    """
    if not 0 <= int(seed) < 2**64:
        raise ContractError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in keys))
    return np.random.Generator(np.random.Philox(ss))


def gaussian_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ContractError("rows and cols must be positive")
    return rng_from(seed).standard_normal((rows, cols))


def match_permutation(estimates: Sequence[np.ndarray],
                      targets: Sequence[np.ndarray]) -> tuple[tuple[int, ...], np.ndarray]:
    """Best assignment of estimates to targets by exhaustive search.

    Returns ``(perm, errors)`` where ``estimates[perm[k]]`` is matched to
    ``targets[k]`` and ``errors[k]`` is the squared distance of that pair.
    The permutation minimises the total squared error.
    """
    est = np.asarray([np.asarray(e, dtype=float) for e in estimates])
    tgt = np.asarray([np.asarray(t, dtype=float) for t in targets])
    if est.shape != tgt.shape or est.ndim != 2:
        raise ContractError("estimates and targets must be K vectors of equal dimension")
    K = est.shape[0]
    if K > MAX_MATCH_K:
        raise UnsupportedSizeError(f"exhaustive matching supports K <= {MAX_MATCH_K}, got {K}")
    # cost[a, b] = ||est[a] - tgt[b]||^2
    cost = np.sum((est[:, None, :] - tgt[None, :, :]) ** 2, axis=-1)
    best, best_total = None, np.inf
    cols = np.arange(K)
    for perm in itertools.permutations(range(K)):
        total = cost[list(perm), cols].sum()
        if total < best_total:
            best, best_total = perm, total
    return tuple(best), cost[list(best), cols]


def sub_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` along the spawn path ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
