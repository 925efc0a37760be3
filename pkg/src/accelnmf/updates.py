"""Inner update rules for the W factor.

Every rule takes the current factor together with ``A = M H^T`` and
``B = H H^T`` and never reads ``M`` itself. The H factor is updated by
running the same rule on the transposed problem, see :func:`transposed`.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DimensionError, PreconditionError


@dataclass(frozen=True)
class Safeguards:
    """Numerical floors used by MU and HALS.

    delta : lower bound applied to MU iterates (0 gives the original MU).
    reinit_value : fill value for a HALS column that collapsed to zero.
    denom_floor : clamp for MU denominators and the HALS ``B_pp`` guard.
    """

    delta: float = 1e-16
    reinit_value: float = 1e-16
    denom_floor: float = 1e-16

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.reinit_value <= 0:
            raise ValueError(f"reinit_value must be > 0, got {self.reinit_value}")
        if self.denom_floor <= 0:
            raise ValueError(f"denom_floor must be > 0, got {self.denom_floor}")


@dataclass(frozen=True)
class PgParams:
    """Armijo line-search constants for the projected gradient step."""

    sigma: float = 0.01
    beta: float = 0.1
    initial_step: float = 1.0
    max_backtracks: int = 20

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.initial_step <= 0:
            raise ValueError(f"initial_step must be > 0, got {self.initial_step}")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")


class PgStep(NamedTuple):
    W: np.ndarray
    step: float
    stalled: bool


def _check_shapes(W, A, B):
    m, r = W.shape
    if A.shape != (m, r) or B.shape != (r, r):
        raise DimensionError(
            f"W{W.shape}, A{A.shape}, B{B.shape} are not conformal")


def mu_update(W, A, B, sg=Safeguards(), check=True):
    """One multiplicative update ``max(delta, W * A / max(W B, floor))``.

    ``check=False`` skips the shape and sign validation; the driver uses it
    in the inner loop, where both are guaranteed.
    """
    if check:
        _check_shapes(W, A, B)
        if W.size and W.min() < 0:
            raise PreconditionError("mu_update requires W >= 0")
    out = W @ B
    np.maximum(out, sg.denom_floor, out=out)
    np.divide(A, out, out=out)
    out *= W
    return np.maximum(out, sg.delta, out=out)


def hals_column_update(W, A, B, p, sg=Safeguards()):
    """Replace column ``p`` of ``W`` in place by its exact nonnegative minimizer.

    Columns to the left of ``p`` are expected to hold their new values
    already. A column whose ``B_pp`` is below ``sg.denom_floor`` is left
    alone; a column that comes out all-zero is refilled with
    ``sg.reinit_value``.
    """
    bpp = B[p, p]
    if bpp <= sg.denom_floor:
        return
    others = B[:, p].copy()
    others[p] = 0.0
    col = np.maximum(0.0, (A[:, p] - W @ others) / bpp)
    if not col.any():
        col.fill(sg.reinit_value)
    W[:, p] = col


def hals_update(W, A, B, sg=Safeguards(), check=True):
    """One HALS sweep over the columns of ``W`` in ascending order."""
    if check:
        _check_shapes(W, A, B)
        scale = max(1.0, float(np.abs(B).max())) if B.size else 1.0
        if not np.allclose(B, B.T, rtol=0, atol=1e-12 * scale):
            raise PreconditionError("hals_update requires a symmetric B")
    W = np.array(W, dtype=np.float64, order="C")
    for p in range(W.shape[1]):
        hals_column_update(W, A, B, p, sg)
    return W


def quadratic_change(W, Wn, A, B):
    """``f(Wn) - f(W)`` for ``f(X) = ||M - X H||_F^2``, from ``A`` and ``B`` only."""
    D = Wn - W
    G = 2.0 * (W @ B - A)
    return float(np.vdot(G, D) + np.vdot(D @ B, D))


def pg_gradient(W, A, B):
    """Gradient ``2 W B - 2 A`` of ``||M - W H||_F^2`` with respect to ``W``."""
    return 2.0 * (W @ B) - 2.0 * A


def pg_update(W, A, B, pp=PgParams(), step=None):
    """One projected gradient step with an Armijo line search.

    The search starts from ``step`` (``pp.initial_step`` when omitted) and
    follows Lin's scheme: if that step already gives sufficient decrease it
    is enlarged by ``1 / beta`` while decrease persists and the projected
    point keeps moving, otherwise it is shrunk by ``beta``. Sufficient
    decrease means ``f(W') - f(W) <= sigma <G, W' - W>``, evaluated through
    the exact quadratic model.

    Returns
    -------
    PgStep
        ``(W', accepted_step, stalled)``. When no step is accepted within
        ``pp.max_backtracks`` reductions ``W`` is returned unchanged with
        ``stalled=True`` and the step ``start * beta**max_backtracks``.
    """
    _check_shapes(W, A, B)
    s = pp.initial_step if step is None else float(step)
    G = pg_gradient(W, A, B)

    def sufficient(Wn):
        D = Wn - W
        # (1 - sigma) <G, D> + <D B, D> <= 0
        return (1.0 - pp.sigma) * np.vdot(G, D) + np.vdot(D @ B, D) <= 0.0

    Wn = np.maximum(0.0, W - s * G)
    if sufficient(Wn):
        for _ in range(pp.max_backtracks):
            s_up = s / pp.beta
            Wup = np.maximum(0.0, W - s_up * G)
            if not sufficient(Wup) or np.array_equal(Wup, Wn):
                break
            s, Wn = s_up, Wup
        return PgStep(Wn, s, False)
    for _ in range(pp.max_backtracks):
        s *= pp.beta
        Wn = np.maximum(0.0, W - s * G)
        if sufficient(Wn):
            return PgStep(Wn, s, False)
    return PgStep(W.copy(), s, True)


def transposed(rule):
    """Lift a W-side rule to the H side.

    ``transposed(rule)(H, WtM, WtW)`` updates ``H`` (r x n) given
    ``W^T M`` and ``W^T W`` by applying ``rule`` to ``H^T`` with
    ``A = (W^T M)^T``.
    """
    def h_rule(H, WtM, WtW, *args, **kwargs):
        out = rule(np.ascontiguousarray(H.T), np.ascontiguousarray(WtM.T),
                   WtW, *args, **kwargs)
        if isinstance(out, PgStep):
            return out._replace(W=np.ascontiguousarray(out.W.T))
        return np.ascontiguousarray(out.T)
    return h_rule
