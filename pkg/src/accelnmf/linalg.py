"""Storage helpers and the kernels every NMF update needs.

Dense matrices are plain C-ordered ``float64`` ndarrays, sparse ones are
``scipy.sparse.csr_matrix`` with sorted, duplicate-free column indices.
Only :func:`right_product` and :func:`left_product` read the data matrix
during an update; both report to an optional :class:`ProductCounter`.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError, PreconditionError

# Below this ratio ||M - WH||^2 / ||M||^2 the expanded identity has lost
# most of its significant digits to cancellation.
_CANCELLATION_RATIO = 1e-6
_CHUNK_ENTRIES = 1 << 20


@dataclass
class ProductCounter:
    """Counts evaluations of the two kernels that read ``M``."""

    right: int = 0
    left: int = 0

    @property
    def total(self):
        return self.right + self.left


def as_dense(X, nonnegative=False):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got ndim={X.ndim}")
    if nonnegative and X.size and X.min() < 0:
        i, j = np.unravel_index(np.argmin(X), X.shape)
        raise PreconditionError(f"negative entry {X[i, j]!r} at ({i}, {j})")
    return X


def as_csr(X):
    """Return ``X`` as canonical CSR (sorted indices, duplicates summed)."""
    X = sp.csr_matrix(X, dtype=np.float64, copy=True)
    X.sum_duplicates()
    X.sort_indices()
    return X


def as_data_matrix(M):
    """Normalize an NMF input and check that it is nonnegative."""
    if sp.issparse(M):
        M = as_csr(M)
        if M.nnz and M.data.min() < 0:
            k = int(np.argmin(M.data))
            i = int(np.searchsorted(M.indptr, k, side="right") - 1)
            raise PreconditionError(
                f"negative entry {M.data[k]!r} at ({i}, {M.indices[k]})")
        return M
    return as_dense(M, nonnegative=True)


def nnz(M):
    """Number of stored entries K (``m * n`` for dense input)."""
    return M.nnz if sp.issparse(M) else M.size


def squared_norm(M):
    data = M.data if sp.issparse(M) else M
    return float(np.dot(data.ravel(), data.ravel()))


def gram(H):
    """Return ``H @ H.T``, exactly symmetric.

    Only the upper triangle of the product is kept; the lower one is a
    mirror of it, so ``B == B.T`` holds bitwise.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1:
        raise DimensionError(f"gram needs a 2-D array with r >= 1 rows, got {H.shape}")
    B = np.triu(H @ H.T)
    return B + np.triu(B, 1).T


def right_product(M, H, counter=None):
    """``A = M @ H.T`` (m x r); on CSR input only stored entries are read."""
    if M.shape[1] != H.shape[1]:
        raise DimensionError(
            f"right_product: M is {M.shape}, H is {H.shape}; column counts differ")
    if counter is not None:
        counter.right += 1
    if sp.issparse(M):
        return np.ascontiguousarray(M @ np.ascontiguousarray(H.T))
    return M @ H.T


def left_product(W, M, counter=None):
    """``W.T @ M`` (r x n) without materializing ``M.T``."""
    if M.shape[0] != W.shape[0]:
        raise DimensionError(
            f"left_product: W is {W.shape}, M is {M.shape}; row counts differ")
    if counter is not None:
        counter.left += 1
    if sp.issparse(M):
        # (M.T @ W).T: the CSC view of M.T shares M's buffers.
        return np.ascontiguousarray((M.T @ W).T)
    return W.T @ M


def _check_factor_shapes(M, W, H):
    m, n = M.shape
    if W.shape[0] != m or H.shape[1] != n or W.shape[1] != H.shape[0]:
        raise DimensionError(
            f"factors W{W.shape} H{H.shape} are not conformal with M{M.shape}")


def direct_error(M, W, H):
    """Entrywise ``||M - W H||_F``, forming the residual in row chunks."""
    _check_factor_shapes(M, W, H)
    m, n = M.shape
    step = max(1, _CHUNK_ENTRIES // max(n, 1))
    total = 0.0
    for start in range(0, m, step):
        stop = min(m, start + step)
        block = M[start:stop]
        block = block.toarray() if sp.issparse(block) else block
        R = block - W[start:stop] @ H
        total += float(np.vdot(R, R))
    return float(np.sqrt(total))


def error_from_products(msq, cross, WtW, HHt):
    """Squared-error identity ``msq - 2 cross + <WtW, HHt>``, clamped at 0.

    ``cross`` is ``<M, W H>``, obtainable either as ``<M H^T, W>`` or as
    ``<W^T M, H>``.
    """
    return max(0.0, msq - 2.0 * cross + float(np.vdot(WtW, HHt)))


def frob_error(M, W, H, A=None, B=None, msq=None):
    """Return ``||M - W H||_F`` without forming the m x n product.

    Parameters
    ----------
    M : ndarray or csr_matrix, shape (m, n)
    W : ndarray, shape (m, r)
    H : ndarray, shape (r, n)
    A, B : ndarray, optional
        Precomputed ``M @ H.T`` and ``H @ H.T``. They must belong to the
        current ``H``; this is not checked.
    msq : float, optional
        Precomputed ``||M||_F^2``.

    Notes
    -----
    When the residual is tiny compared to ``||M||_F`` the expanded identity
    cancels catastrophically, so the residual is then evaluated directly.
    """
    _check_factor_shapes(M, W, H)
    if msq is None:
        msq = squared_norm(M)
    if A is None:
        A = right_product(M, H)
    if B is None:
        B = gram(H)
    sq = error_from_products(msq, float(np.vdot(A, W)), W.T @ W, B)
    if sq <= _CANCELLATION_RATIO * msq:
        return direct_error(M, W, H)
    return float(np.sqrt(sq))
