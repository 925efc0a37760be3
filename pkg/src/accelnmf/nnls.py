"""Exact nonnegative least squares, used as a reference optimum.

The solver is the classical Lawson-Hanson active-set method. It is only
used off the benchmark clock: to validate update rules and to compute the
subproblem optimum behind :func:`inner_error_curve`.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import DimensionError, NnlsCyclingError, PreconditionError
from .linalg import as_data_matrix, frob_error, gram, right_product


def _passive_solve(GtG, Gtc, passive):
    idx = np.flatnonzero(passive)
    z = np.zeros_like(Gtc)
    if idx.size == 0:
        return z
    sub = GtG[np.ix_(idx, idx)]
    try:
        z[idx] = sla.cho_solve(sla.cho_factor(sub), Gtc[idx])
    except (np.linalg.LinAlgError, sla.LinAlgError):
        # Rank-deficient passive set: minimum-norm solution.
        z[idx] = sla.lstsq(sub, Gtc[idx])[0]
    return z


def nnls(G, c, tol=1e-10, max_swaps=None):
    """Solve ``min ||G x - c||_2`` subject to ``x >= 0``.

    Parameters
    ----------
    G : array_like, shape (p, q)
    c : array_like, shape (p,)
    tol : float
        Relative KKT tolerance: at return, ``|g_j| <= tol * ||G^T c||`` on
        the support of ``x`` and ``g_j >= -tol * ||G^T c||`` elsewhere, with
        ``g = G^T (G x - c)``.
    max_swaps : int, optional
        Number of variables allowed to enter the passive set, default
        ``3 * q``.

    Returns
    -------
    x : ndarray, shape (q,)

    Raises
    ------
    NnlsCyclingError
        If the swap cap is reached; ``best_x`` holds the best feasible point.

    Notes
    -----
    The entering variable is the one with the most negative gradient
    component (lowest index on ties). Once an active set repeats, entering
    switches to the lowest eligible index.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    G = np.asarray(G, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64).ravel()
    q = G.shape[1]
    if max_swaps is None:
        max_swaps = 3 * q
    GtG = G.T @ G
    Gtc = G.T @ c
    thresh = tol * np.linalg.norm(Gtc)
    x = np.zeros(q)
    passive = np.zeros(q, dtype=bool)
    if thresh == 0.0:
        return x

    seen = set()
    bland = False
    swaps = 0
    w = Gtc - GtG @ x
    while True:
        eligible = ~passive & (w > thresh)
        if not eligible.any():
            break
        if swaps >= max_swaps:
            raise NnlsCyclingError(
                f"active-set swap cap {max_swaps} reached", x.copy())
        if bland:
            j = int(np.flatnonzero(eligible)[0])
        else:
            j = int(np.argmax(np.where(eligible, w, -np.inf)))
        passive[j] = True
        swaps += 1
        key = passive.tobytes()
        if key in seen:
            bland = True
        seen.add(key)

        while True:
            z = _passive_solve(GtG, Gtc, passive)
            blocking = passive & (z <= 0)
            if not blocking.any():
                x = z
                break
            ratio = x[blocking] / (x[blocking] - z[blocking])
            step = ratio.min()
            x = x + step * (z - x)
            leaving = passive & (x <= 10 * np.finfo(float).eps * np.abs(x).max(initial=1.0))
            # The variable that defined the step always leaves.
            leaving[np.flatnonzero(blocking)[np.argmin(ratio)]] = True
            x[leaving] = 0.0
            passive &= ~leaving
        w = Gtc - GtG @ x
    return x


def kkt_residuals(G, c, x):
    """Return ``(g, scale)`` with ``g = G^T (G x - c)`` and ``scale = ||G^T c||``."""
    G = np.asarray(G, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64).ravel()
    return G.T @ (G @ x - c), float(np.linalg.norm(G.T @ c))


def nnls_factor(M, H, tol=1e-10):
    """Optimal ``W >= 0`` for fixed ``H``: one NNLS problem per row of ``M``."""
    M = as_data_matrix(M)
    H = np.asarray(H, dtype=np.float64)
    if M.shape[1] != H.shape[1]:
        raise DimensionError(f"M{M.shape} and H{H.shape} have different column counts")
    if not np.all(np.any(H != 0, axis=1)):
        raise PreconditionError("H has an all-zero row")
    G = np.ascontiguousarray(H.T)
    W = np.empty((M.shape[0], H.shape[0]))
    for i in range(M.shape[0]):
        row = M.getrow(i).toarray().ravel() if sp.issparse(M) else M[i]
        W[i] = nnls(G, row, tol)
    return W


class InnerErrorCurve(NamedTuple):
    values: np.ndarray
    e_min: float
    degenerate: bool


def inner_error_curve(M, H, W0, rule, L, tol=1e-10):
    """Relative gap of ``L`` inner updates on the W subproblem.

    ``values[l] = (e_l - e_min) / (e_0 - e_min)`` with ``e_l`` the error
    after ``l`` updates and ``e_min`` the exact optimum from
    :func:`nnls_factor`. ``rule`` is ``rule(W, A, B) -> W`` or one of
    ``"mu"``, ``"hals"``, ``"pg"`` with default parameters. Values are clipped to ``[0, 1]`` because
    ``e_min`` itself is only accurate to the solver tolerance.
    If ``W0`` is already optimal, an all-zero curve is returned with
    ``degenerate=True``.
    """
    if isinstance(rule, str):
        from .accel import AccelConfig, make_rule
        rule = make_rule(AccelConfig(algo=rule))
    M = as_data_matrix(M)
    H = np.asarray(H, dtype=np.float64)
    A = right_product(M, H)
    B = gram(H)
    e_min = frob_error(M, nnls_factor(M, H, tol), H, B=B)
    W = np.array(W0, dtype=np.float64)
    errors = [frob_error(M, W, H, A, B)]
    for _ in range(L):
        W = rule(W, A, B)
        errors.append(frob_error(M, W, H, A, B))
    gap0 = errors[0] - e_min
    if gap0 <= 1e-10 * max(errors[0], np.finfo(float).tiny):
        return InnerErrorCurve(np.zeros(L + 1), e_min, True)
    values = np.clip((np.asarray(errors) - e_min) / gap0, 0.0, 1.0)
    return InnerErrorCurve(values, e_min, False)


def nnls_bruteforce(G, c):
    """Exhaustive reference: least squares on every support, best feasible one.

    Exponential in the number of variables; meant for ``q <= 12``.
    """
    G = np.asarray(G, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64).ravel()
    q = G.shape[1]
    best_x, best_obj = np.zeros(q), float(c @ c)
    for mask in range(1, 1 << q):
        idx = [j for j in range(q) if mask >> j & 1]
        z = np.linalg.lstsq(G[:, idx], c, rcond=None)[0]
        if z.min() < 0:
            continue
        x = np.zeros(q)
        x[idx] = z
        res = G @ x - c
        obj = float(res @ res)
        if obj < best_obj:
            best_x, best_obj = x, obj
    return best_x


def nnls_check_suite(problems=200, seed=0, tol=1e-8):
    """Compare :func:`nnls` with :func:`nnls_bruteforce` on random problems.

    Yields ``(name, passed, detail)`` triples.
    """
    rng = np.random.default_rng(seed)
    worst_gap, worst_kkt = 0.0, 0.0
    for _ in range(problems):
        q = int(rng.integers(1, 11))
        p = int(rng.integers(q, q + 8))
        G = rng.standard_normal((p, q))
        c = rng.standard_normal(p)
        x = nnls(G, c)
        ref = nnls_bruteforce(G, c)
        obj = float(np.sum((G @ x - c) ** 2))
        ref_obj = float(np.sum((G @ ref - c) ** 2))
        worst_gap = max(worst_gap, abs(obj - ref_obj) / max(1.0, ref_obj))
        g, scale = kkt_residuals(G, c, x)
        on = x > 0
        viol = max(np.abs(g[on]).max(initial=0.0), (-g[~on]).max(initial=0.0))
        worst_kkt = max(worst_kkt, viol / max(scale, np.finfo(float).tiny))
    yield ("objective vs brute force", worst_gap <= tol,
           f"{problems} problems, worst relative gap {worst_gap:.2e} (tol {tol:g})")
    yield ("KKT certificate", worst_kkt <= 1e-10,
           f"worst scaled violation {worst_kkt:.2e} (tol 1e-10)")
    x = nnls(np.eye(2), [1.0, -2.0])
    yield ("orthant projection", np.allclose(x, [1.0, 0.0], atol=1e-15, rtol=0),
           f"G=I, c=(1,-2) -> {x.tolist()}")
