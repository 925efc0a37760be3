"""Accelerated alternating NMF driver.

Each outer iteration computes ``M H^T`` and ``H H^T`` once and then updates
``W`` up to ``floor(1 + alpha * rho_W)`` times, stopping early once an inner
step moves the factor less than ``epsilon`` times the first one did. The H
side is handled symmetrically. ``alpha = 0`` recovers the plain algorithms.
"""
import math
import statistics
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DimensionError, PreconditionError
from .linalg import (
    ProductCounter, as_data_matrix, direct_error, error_from_products, gram,
    left_product, nnz, right_product, squared_norm, _CANCELLATION_RATIO,
)
from .updates import (
    PgParams, Safeguards, hals_update, mu_update, pg_update,
)

ALGORITHMS = ("mu", "hals", "pg")


@dataclass(frozen=True)
class CostModel:
    m: int
    n: int
    r: int
    K: int
    rho_w: float
    rho_h: float


def cost_model(m, n, r, K):
    """Flop ratio between the first inner update and the following ones."""
    if min(m, n, r) < 1:
        raise ValueError(f"m, n, r must be >= 1, got {(m, n, r)}")
    if not 0 <= K <= m * n:
        raise ValueError(f"K={K} outside [0, m*n={m * n}]")
    if r >= min(m, n):
        warnings.warn(f"rank r={r} is not below min(m, n)={min(m, n)}",
                      stacklevel=2)
    rho_w = 1.0 + (K + n * r) / (m * r + m)
    rho_h = 1.0 + (K + m * r) / (n * r + n)
    return CostModel(m, n, r, K, rho_w, rho_h)


def inner_budget(alpha, rho):
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return max(1, math.floor(1.0 + alpha * rho))


@dataclass(frozen=True)
class AccelConfig:
    """One algorithm configuration.

    ``max_outer`` and ``time_budget`` may each be ``None`` (unbounded), but
    not both. ``rho_source`` selects where inner budgets come from:
    ``"model"`` (flop count) or ``"measured"`` (:func:`calibrate_rho`).
    """

    algo: str = "mu"
    alpha: float = 0.0
    epsilon: float = 0.0
    safeguards: Safeguards = field(default_factory=Safeguards)
    pg_params: PgParams = field(default_factory=PgParams)
    max_outer: Optional[int] = 100
    time_budget: Optional[float] = None
    seed: int = 0
    rho_source: str = "model"
    label: str = ""

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if self.alpha < 0 or self.epsilon < 0:
            raise ValueError("alpha and epsilon must be >= 0")
        if self.max_outer is None and self.time_budget is None:
            raise ValueError("max_outer and time_budget cannot both be unbounded")
        if self.max_outer is not None and self.max_outer < 0:
            raise ValueError("max_outer must be >= 0")
        if self.rho_source not in ("model", "measured"):
            raise ValueError(f"unknown rho_source {self.rho_source!r}")
        if not self.label:
            object.__setattr__(self, "label", default_label(self.algo, self.alpha, self.epsilon))


def default_label(algo, alpha, epsilon):
    name = algo.upper()
    if alpha == 0 and epsilon == 0:
        return name
    return f"A-{name}(a={alpha:g},e={epsilon:g})"


PRESETS = {
    "mu": dict(algo="mu", alpha=0.0, epsilon=0.0),
    "hals": dict(algo="hals", alpha=0.0, epsilon=0.0),
    "pg": dict(algo="pg", alpha=0.0, epsilon=0.0),
    "a-mu": dict(algo="mu", alpha=2.0, epsilon=0.1),
    "a-hals": dict(algo="hals", alpha=0.5, epsilon=0.1),
    "a-pg": dict(algo="pg", alpha=0.5, epsilon=0.0),
}


def preset(name, **overrides):
    """Configurations used in the experiments: ``a-mu``, ``a-hals``, ``a-pg``
    and the unaccelerated ``mu``, ``hals``, ``pg``."""
    params = dict(PRESETS[name.lower()])
    params.setdefault("label", name.upper())
    params.update(overrides)
    return AccelConfig(**params)


class PgRule:
    """Projected gradient rule that warm-starts its step across calls."""

    def __init__(self, pp=PgParams()):
        self.pp = pp
        self.step = pp.initial_step
        self.stalls = 0

    def __call__(self, W, A, B):
        out = pg_update(W, A, B, self.pp, self.step)
        self.step = out.step
        self.stalls += out.stalled
        return out.W


def make_rule(cfg):
    """Return a fresh ``rule(W, A, B) -> W`` for ``cfg``."""
    sg = cfg.safeguards
    if cfg.algo == "mu":
        return lambda W, A, B: mu_update(W, A, B, sg, check=False)
    if cfg.algo == "hals":
        return lambda W, A, B: hals_update(W, A, B, sg, check=False)
    return PgRule(cfg.pg_params)


def inner_loop(W0, A, B, rule, budget, epsilon):
    """Apply ``rule`` up to ``budget`` times with the displacement stop test.

    After iterate ``l`` the loop stops if
    ``||W_l - W_{l-1}||_F <= epsilon * ||W_1 - W_0||_F``.

    Returns
    -------
    W : ndarray
    used : int
        Number of updates performed, between 1 and ``budget``.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    W_prev = W0
    first = None
    for used in range(1, budget + 1):
        W = rule(W_prev, A, B)
        moved = np.linalg.norm(W - W_prev)
        if first is None:
            first = moved
        if moved <= epsilon * first:
            break
        W_prev = W
    return W, used


@dataclass
class FactorPair:
    W: np.ndarray
    H: np.ndarray

    @property
    def rank(self):
        return self.W.shape[1]


@dataclass
class RunTrace:
    """Per outer iteration record of one run. Sample 0 is the initial point."""

    config: AccelConfig
    rho_w: float
    rho_h: float
    rho_source: str
    elapsed: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    inner_counts: list = field(default_factory=list)
    factors: Optional[FactorPair] = None
    m_products: ProductCounter = field(default_factory=ProductCounter)
    pg_stalls: int = 0

    @property
    def budgets(self):
        return (inner_budget(self.config.alpha, self.rho_w),
                inner_budget(self.config.alpha, self.rho_h))

    @property
    def outer_iterations(self):
        return len(self.inner_counts)

    def rows(self):
        """Rows ``(outer_iter, elapsed_s, error, w_inner, h_inner)``; the
        initial sample carries zero inner counts."""
        counts = [(0, 0)] + list(self.inner_counts)
        return [(k, t, e, wi, hi) for k, (t, e, (wi, hi))
                in enumerate(zip(self.elapsed, self.errors, counts))]


def _check_factors(M, W, H):
    m, n = M.shape
    if W.ndim != 2 or H.ndim != 2:
        raise DimensionError("factors must be 2-D arrays")
    if W.shape[0] != m or H.shape[1] != n or W.shape[1] != H.shape[0]:
        raise DimensionError(
            f"W{W.shape} and H{H.shape} are not conformal with M{M.shape}")
    if (W.size and W.min() < 0) or (H.size and H.min() < 0):
        raise PreconditionError("initial factors must be nonnegative")


def run_nmf(M, W0, H0, cfg, rho=None, clock=time.perf_counter):
    """Run the accelerated scheme from ``(W0, H0)``.

    Parameters
    ----------
    M : ndarray or csr_matrix, shape (m, n)
        Nonnegative data.
    W0, H0 : ndarray
        Initial factors, shapes (m, r) and (r, n).
    cfg : AccelConfig
    rho : tuple of float, optional
        ``(rho_w, rho_h)`` overriding the flop model, e.g. the output of
        :func:`calibrate_rho`.
    clock : callable
        Monotonic clock in seconds. Only update work is timed; the error
        evaluation after each outer iteration runs with the clock paused.

    Returns
    -------
    RunTrace
    """
    M = as_data_matrix(M)
    W = np.array(W0, dtype=np.float64, order="C")
    H = np.array(H0, dtype=np.float64, order="C")
    _check_factors(M, W, H)
    m, n = M.shape
    r = W.shape[1]
    if cfg.algo == "mu":
        W = np.maximum(W, cfg.safeguards.delta)
        H = np.maximum(H, cfg.safeguards.delta)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = cost_model(m, n, r, nnz(M))
    if rho is None:
        rho_w, rho_h, source = model.rho_w, model.rho_h, "model"
    else:
        (rho_w, rho_h), source = rho, "measured"
    budget_w = inner_budget(cfg.alpha, rho_w)
    budget_h = inner_budget(cfg.alpha, rho_h)

    trace = RunTrace(cfg, rho_w, rho_h, source)
    counter = trace.m_products
    msq = squared_norm(M)
    rule_w, rule_h = make_rule(cfg), make_rule(cfg)

    def evaluate(WtM, WtW):
        sq = error_from_products(msq, float(np.vdot(WtM, H)), WtW, gram(H))
        if sq <= _CANCELLATION_RATIO * msq:
            return direct_error(M, W, H)
        return math.sqrt(sq)

    trace.elapsed.append(0.0)
    trace.errors.append(evaluate(left_product(W, M), W.T @ W))
    elapsed = 0.0
    k = 0
    while cfg.max_outer is None or k < cfg.max_outer:
        if cfg.time_budget is not None and elapsed >= cfg.time_budget:
            break
        start = clock()
        A = right_product(M, H, counter)
        B = gram(H)
        W, w_used = inner_loop(W, A, B, rule_w, budget_w, cfg.epsilon)
        WtM = left_product(W, M, counter)
        WtW = gram(W.T)
        Ht, h_used = inner_loop(np.ascontiguousarray(H.T), np.ascontiguousarray(WtM.T),
                                WtW, rule_h, budget_h, cfg.epsilon)
        H = np.ascontiguousarray(Ht.T)
        elapsed += clock() - start
        k += 1
        trace.elapsed.append(elapsed)
        trace.errors.append(evaluate(WtM, WtW))
        trace.inner_counts.append((w_used, h_used))

    trace.factors = FactorPair(W, H)
    for rule in (rule_w, rule_h):
        trace.pg_stalls += getattr(rule, "stalls", 0)
    return trace


def _timed(fn, clock=time.perf_counter):
    start = clock()
    fn()
    return clock() - start


def calibrate_rho(M, W, H, algo="hals", repetitions=5, timer=None,
                  resolution=None, safeguards=Safeguards(), pg_params=PgParams()):
    """Measure the cost ratio of a first inner update to a subsequent one.

    ``T_first`` times the products with ``M``, the Gram matrix and one
    update; ``T_next`` times one update alone. Both are medians over
    ``repetitions`` trials. When ``T_next`` is under ten clock ticks, the
    update is repeated in a batch and the batch time divided.

    Parameters
    ----------
    timer : callable, optional
        ``timer(fn) -> seconds``; runs ``fn`` and returns its duration.
        Defaults to ``time.perf_counter`` based timing.
    resolution : float, optional
        Clock granularity in seconds, by default that of ``perf_counter``.

    Returns
    -------
    (rho_w, rho_h) : tuple of float
    """
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    M = as_data_matrix(M)
    W = np.ascontiguousarray(W, dtype=np.float64)
    H = np.ascontiguousarray(H, dtype=np.float64)
    _check_factors(M, W, H)
    if timer is None:
        timer = _timed
    if resolution is None:
        resolution = time.get_clock_info("perf_counter").resolution
    cfg = AccelConfig(algo=algo, safeguards=safeguards, pg_params=pg_params)

    def side(first_products, X, A, B):
        rule = make_rule(cfg)

        def first():
            first_products()
            rule(X, A, B)

        def once():
            rule(X, A, B)

        t_first = statistics.median(timer(first) for _ in range(repetitions))
        t_next = statistics.median(timer(once) for _ in range(repetitions))
        if t_next < 10 * resolution:
            batch = 1
            while t_next * batch < 10 * resolution and batch < 1 << 20:
                batch *= 10

            def batched():
                for _ in range(batch):
                    rule(X, A, B)

            t_next = statistics.median(timer(batched) for _ in range(repetitions)) / batch
        return t_first / max(t_next, np.finfo(float).tiny)

    A_w, B_w = right_product(M, H), gram(H)
    A_h, B_h = np.ascontiguousarray(left_product(W, M).T), gram(W.T)
    Ht = np.ascontiguousarray(H.T)
    rho_w = side(lambda: (right_product(M, H), gram(H)), W, A_w, B_w)
    rho_h = side(lambda: (left_product(W, M), gram(W.T)), Ht, A_h, B_h)
    return rho_w, rho_h
