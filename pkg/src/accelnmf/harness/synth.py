"""Synthetic test matrices and seeded, scaled initial factors."""
import numpy as np
import scipy.sparse as sp

from ..accel import FactorPair
from ..exceptions import DegenerateInitError
from ..linalg import as_data_matrix, gram, right_product

SYNTH_KINDS = ("uniform-dense", "planted-lowrank", "sparse-uniform")


def synth_matrix(kind, m, n, r_true=1, density=1.0, noise=0.0, seed=0):
    """Generate a nonnegative test matrix, deterministic per ``seed``.

    ``uniform-dense``
        i.i.d. U[0, 1) entries.
    ``planted-lowrank``
        ``W* H* + noise * U[0, 1)`` with U[0, 1) factors of rank ``r_true``.
    ``sparse-uniform``
        CSR matrix whose pattern is a Bernoulli(``density``) mask and whose
        stored values are drawn from (0, 1].
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {SYNTH_KINDS}")
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    if kind == "uniform-dense":
        return rng.random((m, n))
    if kind == "planted-lowrank":
        if r_true < 1:
            raise ValueError("r_true must be >= 1")
        M = rng.random((m, r_true)) @ rng.random((r_true, n))
        if noise:
            M += noise * rng.random((m, n))
        return M
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    mask = rng.random((m, n)) < density
    rows, cols = np.nonzero(mask)
    vals = 1.0 - rng.random(rows.size)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    M.sort_indices()
    return M


def init_factors(m, n, r, seed, M, max_redraws=10):
    """Uniform random factors scaled so that the best multiple of ``W H``
    approximating ``M`` is ``W H`` itself.

    Both factors are multiplied by ``sqrt(<M, WH> / ||WH||_F^2)``. A draw
    with ``<M, WH> = 0`` is replaced by one from ``seed + 1``, up to
    ``max_redraws`` times.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    M = as_data_matrix(M)
    if M.shape != (m, n):
        raise ValueError(f"M has shape {M.shape}, expected {(m, n)}")
    for attempt in range(max_redraws + 1):
        rng = np.random.default_rng(seed + attempt)
        W = rng.random((m, r))
        H = rng.random((r, n))
        cross = float(np.vdot(right_product(M, H), W))
        wh_sq = float(np.vdot(gram(W.T), gram(H)))
        if cross > 0 and wh_sq > 0:
            scale = np.sqrt(cross / wh_sq)
            return FactorPair(W * scale, H * scale)
    raise DegenerateInitError(
        f"<M, WH> vanished for seeds {seed}..{seed + max_redraws}")
