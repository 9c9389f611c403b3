"""Order-3 tensor kernels.

Each kernel has a numba implementation and a pure-numpy one. The numba path
is used when numba imports and ``RMTWHITEN_DISABLE_NUMBA`` is unset (or
``0``); both are always importable as ``*_numba`` / ``*_numpy`` for testing
and benchmarking.
"""
from __future__ import annotations

import os

import numpy as np

_BLOCK = 65536


def _env_disabled() -> bool:
    return os.environ.get("RMTWHITEN_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_disabled()


# --- numpy -----------------------------------------------------------------

def third_moment_sum_numpy(xi: np.ndarray) -> np.ndarray:
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    K = xi.shape[1]
    out = np.zeros((K, K, K))
    for start in range(0, xi.shape[0], _BLOCK):
        blk = xi[start:start + _BLOCK]
        out += np.einsum("ni,nj,nk->ijk", blk, blk, blk, optimize=True)
    return out


def multilinear_numpy(T: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum("ijk,ai,bj,ck->abc", T, A, A, A, optimize=True)


def contract_numpy(T: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.tensordot(T, theta, axes=([2], [0]))


# --- numba -----------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def third_moment_sum_numba(xi):
        N, K = xi.shape
        out = np.zeros((K, K, K))
        # accumulate the a <= b <= c block only, in row order
        for n in range(N):
            for a in range(K):
                xa = xi[n, a]
                for b in range(a, K):
                    xab = xa * xi[n, b]
                    for c in range(b, K):
                        out[a, b, c] += xab * xi[n, c]
        for a in range(K):
            for b in range(a, K):
                for c in range(b, K):
                    v = out[a, b, c]
                    out[a, c, b] = v
                    out[b, a, c] = v
                    out[b, c, a] = v
                    out[c, a, b] = v
                    out[c, b, a] = v
        return out

    @numba.njit(cache=True, nogil=True)
    def _mode_product(T, A):
        # out[a, j, k] = sum_i A[a, i] T[i, j, k], then rotate modes
        m = A.shape[0]
        n1, n2, n3 = T.shape
        out = np.zeros((n2, n3, m))
        for a in range(m):
            for i in range(n1):
                w = A[a, i]
                if w == 0.0:
                    continue
                for j in range(n2):
                    for k in range(n3):
                        out[j, k, a] += w * T[i, j, k]
        return out

    @numba.njit(cache=True, nogil=True)
    def multilinear_numba(T, A):
        # three mode products, each rotating the transformed mode to the back
        return _mode_product(_mode_product(_mode_product(T, A), A), A)

    @numba.njit(cache=True, nogil=True)
    def contract_numba(T, theta):
        K1, K2, K3 = T.shape
        out = np.zeros((K1, K2))
        for a in range(K1):
            for b in range(K2):
                s = 0.0
                for c in range(K3):
                    s += T[a, b, c] * theta[c]
                out[a, b] = s
        return out

else:  # pragma: no cover
    third_moment_sum_numba = third_moment_sum_numpy
    multilinear_numba = multilinear_numpy
    contract_numba = contract_numpy


def third_moment_sum(xi: np.ndarray) -> np.ndarray:
    """``sum_n xi_n (x) xi_n (x) xi_n`` for an N x K array."""
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    if USE_NUMBA:
        return third_moment_sum_numba(xi)
    return third_moment_sum_numpy(xi)


def multilinear(T: np.ndarray, A: np.ndarray) -> np.ndarray:
    T = np.ascontiguousarray(T, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    if USE_NUMBA:
        return multilinear_numba(T, A)
    return multilinear_numpy(T, A)


def contract(T: np.ndarray, theta: np.ndarray) -> np.ndarray:
    T = np.ascontiguousarray(T, dtype=np.float64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if USE_NUMBA:
        return contract_numba(T, theta)
    return contract_numpy(T, theta)
