"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line through the ``report`` fixture;
the lines are printed in the "acceptance criteria" section at the end of
the pytest run.
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from accelnmf.accel import (
    AccelConfig, cost_model, inner_budget, inner_loop, make_rule, preset, run_nmf,
)
from accelnmf.harness import io
from accelnmf.harness.experiment import (
    ExperimentSpec, SynthSource, per_seed_times, run_experiment, time_to_threshold,
)
from accelnmf.harness.synth import init_factors, synth_matrix
from accelnmf.linalg import gram, left_product, right_product
from accelnmf.nnls import inner_error_curve, nnls, nnls_factor
from accelnmf.updates import (
    Safeguards, hals_column_update, hals_update, mu_update, pg_gradient, pg_update,
)

from conftest import dense_objective, enumerate_supports, random_instance

SG = Safeguards(delta=1e-16)


def _verdict(report, number, passed, detail):
    report(number, bool(passed), detail)
    assert passed, detail


def test_c01_cost_model_golden(report):
    cm = cost_model(361, 2429, 20, 876869)
    ok = 123 <= cm.rho_w < 124 and 18 <= cm.rho_h < 19
    _verdict(report, 1, ok, f"CBCL-sized rho_W={cm.rho_w:.4f} in [123,124), "
                            f"rho_H={cm.rho_h:.4f} in [18,19)")


def test_c02_flop_lower_bound(report):
    g = np.random.default_rng(2)
    checked, bad = 0, []
    while checked < 1000:
        m, n = (int(v) for v in g.integers(2, 400, size=2))
        r = int(g.integers(1, min(m, n)))
        lo = r * (m + n)
        if lo > m * n:
            continue
        K = int(g.integers(lo, m * n + 1))
        rho = cost_model(m, n, r, K).rho_w
        exact = 1 + Fraction(K + n * r, m * r + m)
        if not (rho >= 2 * r / (r + 1) and exact >= Fraction(2 * r, r + 1)):
            bad.append((m, n, r, K))
        checked += 1
    _verdict(report, 2, not bad,
             f"rho_W >= 2r/(r+1) on {checked} random (m,n,r,K) with K >= r(m+n); "
             f"violations: {bad[:3]}")


def test_c03_monotonicity(report):
    g = np.random.default_rng(3)
    rules = {
        "MU": lambda W, A, B: mu_update(W, A, B, SG),
        "HALS": lambda W, A, B: hals_update(W, A, B),
    }
    worst = 0.0
    for trial in range(200):
        m, n = (int(v) for v in g.integers(2, 31, size=2))
        r = int(g.integers(1, 6))
        M, W, H = random_instance(g, m, n, r, 0.1 if trial % 2 else 1.0)
        for name in ("MU", "HALS", "PG"):
            Wk, Hk = W.copy(), H.copy()
            step_w = step_h = 1.0
            prev = dense_objective(M, Wk, Hk)
            # Small instances can reach an exact fit, where the residual norm
            # is pure evaluation round-off; allow that on top of 1e-10.
            roundoff = 16 * np.finfo(float).eps * dense_objective(M, 0 * Wk, Hk)
            for _ in range(3):
                A, B = right_product(M, Hk), gram(Hk)
                if name == "PG":
                    out = pg_update(Wk, A, B, step=step_w)
                    Wk, step_w = out.W, out.step
                else:
                    Wk = rules[name](Wk, A, B)
                cur = dense_objective(M, Wk, Hk)
                worst = max(worst, (cur - prev - roundoff) / max(prev, np.finfo(float).tiny))
                prev = cur
                At, Bt = left_product(Wk, M).T, gram(Wk.T)
                if name == "PG":
                    out = pg_update(Hk.T, At, Bt, step=step_h)
                    Hk, step_h = out.W.T, out.step
                else:
                    Hk = rules[name](Hk.T.copy(), At.copy(), Bt).T
                cur = dense_objective(M, Wk, Hk)
                worst = max(worst, (cur - prev - roundoff) / max(prev, np.finfo(float).tiny))
                prev = cur
    _verdict(report, 3, worst <= 1e-10,
             f"200 instances (dense and 10% sparse) x MU/HALS/PG, 6 inner updates each: "
             f"worst relative increase {worst:.2e} (tol 1e-10, beyond 16 eps ||M|| "
             f"evaluation round-off)")


def test_c04_mu_fixed_point_and_floor(report):
    g = np.random.default_rng(4)
    fixed_ok, floor_min = True, np.inf
    for _ in range(100):
        m, k, r = (int(v) for v in g.integers(1, 20, size=3))
        W = g.random((m, r)) + 1e-3
        B = gram(g.random((r, k)))
        fixed_ok &= np.array_equal(mu_update(W, W @ B, B, SG), W)
        # arbitrary (also zero and negative) numerators
        A = g.standard_normal((m, r)) * (g.random((m, r)) < 0.5)
        floor_min = min(floor_min, mu_update(W, A, B, SG).min())
    ok = fixed_ok and floor_min >= 1e-16
    _verdict(report, 4, ok, f"A=WB returns W bitwise: {fixed_ok}; smallest MU output "
                            f"entry {floor_min:.1e} (floor 1e-16)")


def test_c05_hals_optimality(report):
    g = np.random.default_rng(5)
    worst_kkt = 0.0
    for _ in range(100):
        m, n = (int(v) for v in g.integers(2, 31, size=2))
        r = int(g.integers(1, 6))
        M, W, H = random_instance(g, m, n, r)
        A, B = right_product(M, H), gram(H)
        tol = np.linalg.norm(A)
        W = W.copy()
        for p in range(r):
            hals_column_update(W, A, B, p)
            X = W.copy()
            if np.all(X[:, p] == Safeguards().reinit_value):
                X[:, p] = 0.0  # the column optimum before the reseed
            resid = (A - X @ B)[:, p]
            pos = X[:, p] > 0
            viol = max(np.abs(resid[pos]).max(initial=0.0), resid[~pos].max(initial=0.0))
            worst_kkt = max(worst_kkt, viol / tol)
    worst_gap = 0.0
    for _ in range(20):
        m, n = (int(v) for v in g.integers(2, 21, size=2))
        r = int(g.integers(1, 5))
        M, H = g.random((m, n)), g.random((r, n)) + 0.01
        opt = dense_objective(M, nnls_factor(M, H), H)
        A, B = right_product(M, H), gram(H)
        W = g.random((m, r))
        for _ in range(500):
            W = hals_update(W, A, B)
        worst_gap = max(worst_gap, abs(dense_objective(M, W, H) - opt) / opt)
    ok = worst_kkt <= 1e-9 and worst_gap <= 1e-6
    _verdict(report, 5, ok, f"column KKT on 100 instances: worst {worst_kkt:.1e}*||A|| "
                            f"(tol 1e-9); 500 HALS sweeps vs NNLS optimum on 20 instances: "
                            f"worst relative gap {worst_gap:.1e} (tol 1e-6)")


def test_c06_nnls_vs_bruteforce(report):
    g = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        q = int(g.integers(1, 11))
        p = int(g.integers(1, 16))
        G, c = g.standard_normal((p, q)), g.standard_normal(p)
        x = nnls(G, c)
        obj = float(np.sum((G @ x - c) ** 2))
        _, ref = enumerate_supports(G, c)
        worst = max(worst, abs(obj - ref) / max(1.0, ref))
    _verdict(report, 6, worst <= 1e-8,
             f"200 problems with <= 10 variables: worst objective gap {worst:.1e} (tol 1e-8)")


def test_c07_pg_gradient(report):
    g = np.random.default_rng(7)
    worst, h = 0.0, 1e-6
    for _ in range(20):
        M, W, H = g.random((4, 6)), g.random((4, 3)), g.random((3, 6))
        G = pg_gradient(W, right_product(M, H), gram(H))
        f = lambda X: float(np.sum((M - X @ H) ** 2))  # noqa: E731
        fd = np.empty_like(W)
        for idx in np.ndindex(W.shape):
            E = np.zeros_like(W)
            E[idx] = h
            fd[idx] = (f(W + E) - f(W - E)) / (2 * h)
        worst = max(worst, np.abs(fd - G).max() / np.abs(G).max())
    _verdict(report, 7, worst <= 1e-5,
             f"central differences vs 2WB-2A on 20 random 4x3 W: worst relative "
             f"deviation {worst:.1e} (tol 1e-5)")


def _plain_iterates(M, W, H, algo, K):
    """Unaccelerated alternating updates written out directly."""
    steps = [1.0, 1.0]
    out = []

    def apply(X, A, B, side):
        if algo == "mu":
            return mu_update(X, A, B)
        if algo == "hals":
            return hals_update(X, A, B)
        res = pg_update(X, A, B, step=steps[side])
        steps[side] = res.step
        return res.W

    for _ in range(K):
        W = apply(W, M @ H.T, H @ H.T, 0)
        H = apply(H.T, M.T @ W, W.T @ W, 1).T
        out.append((W, H))
    return out


def test_c08_algorithm_contracts(report):
    problems = []
    M = synth_matrix("planted-lowrank", 40, 30, 4, noise=0.1, seed=8)
    f = init_factors(40, 30, 4, 8, M)
    Ms = synth_matrix("sparse-uniform", 60, 50, density=0.1, seed=8)
    fs = init_factors(60, 50, 4, 8, Ms)

    # inner counts within budgets; 2 products with M per outer iteration
    for data, init in ((M, f), (Ms, fs)):
        for name in ("a-mu", "a-hals", "a-pg"):
            tr = run_nmf(data, init.W, init.H, preset(name, max_outer=20))
            bw, bh = inner_budget(tr.config.alpha, tr.rho_w), inner_budget(tr.config.alpha, tr.rho_h)
            if any(w > bw or h > bh for w, h in tr.inner_counts):
                problems.append(f"{name}: inner count above budget")
            if tr.m_products.total != 2 * tr.outer_iterations:
                problems.append(f"{name}: {tr.m_products.total} products in "
                                f"{tr.outer_iterations} iterations")

    # epsilon >= 1 forces a single inner update
    A, B = right_product(M, f.H), gram(f.H)
    for algo in ("mu", "hals", "pg"):
        for eps in (1.0, 2.5):
            _, used = inner_loop(f.W, A, B, make_rule(AccelConfig(algo=algo)), 50, eps)
            if used != 1:
                problems.append(f"{algo} eps={eps}: {used} inner updates")
        tr = run_nmf(M, f.W, f.H, AccelConfig(algo=algo, alpha=3.0, epsilon=1.0, max_outer=5))
        if any(c != (1, 1) for c in tr.inner_counts):
            problems.append(f"{algo}: eps=1 run used {tr.inner_counts}")

    # alpha = 0 reproduces the plain iterates at equal outer indices
    worst = 0.0
    for algo in ("mu", "hals", "pg"):
        ref = _plain_iterates(M, f.W, f.H, algo, 10)
        for k in range(1, 11):
            got = run_nmf(M, f.W, f.H, AccelConfig(algo=algo, max_outer=k)).factors
            Wr, Hr = ref[k - 1]
            worst = max(worst, np.abs(got.W - Wr).max() / np.abs(Wr).max(),
                        np.abs(got.H - Hr).max() / np.abs(Hr).max())
    if worst > 1e-12:
        problems.append(f"alpha=0 deviates by {worst:.1e}")
    _verdict(report, 8, not problems,
             f"budgets respected, eps>=1 -> 1 inner step, 2 M-products per outer "
             f"iteration, alpha=0 iterates match to {worst:.1e} (tol 1e-12)"
             + (f"; problems: {problems}" if problems else ""))


def _timing_experiment(dataset, rank, configs, budget):
    spec = ExperimentSpec(dataset=dataset, rank=rank, configs=configs,
                          seeds=list(range(10)), time_budget=budget)
    res = run_experiment(spec, write=False)
    assert not res.failures, res.failures
    stats = {}
    for label, curve in res.curves.items():
        stats[label] = (float(np.median(per_seed_times(curve, 0.01))),
                        time_to_threshold(curve.t, curve.mean, 0.01))
    return stats


@pytest.mark.slow
def test_c09_acceleration(report):
    dense = SynthSource("planted-lowrank", 200, 200, 10, 1.0, 0.05, seed=9)
    sparse = SynthSource("sparse-uniform", 500, 400, 1, 0.02, 0.0, seed=9)
    mu = _timing_experiment(dense, 10, [preset("mu"), preset("a-mu")], 2.0)
    hals = _timing_experiment(dense, 10, [preset("hals"), preset("a-hals")], 1.5)
    smu = _timing_experiment(sparse, 10, [preset("mu"), preset("a-mu")], 1.0)
    checks = {
        "dense A-MU < MU": mu["A-MU"][0] < mu["MU"][0],
        "dense A-HALS <= 1.25 x HALS": hals["A-HALS"][0] <= 1.25 * hals["HALS"][0],
        "sparse A-MU < MU": smu["A-MU"][0] < smu["MU"][0],
    }
    fmt = lambda s: f"{s[0]:.3f}s (mean curve {s[1]:.3f}s)"  # noqa: E731
    detail = (f"median per-seed time to E<=0.01 over 10 seeds: dense MU {fmt(mu['MU'])} vs "
              f"A-MU {fmt(mu['A-MU'])}; dense HALS {fmt(hals['HALS'])} vs A-HALS "
              f"{fmt(hals['A-HALS'])}; sparse MU {fmt(smu['MU'])} vs A-MU {fmt(smu['A-MU'])}"
              f"; failed: {[k for k, v in checks.items() if not v]}")
    _verdict(report, 9, all(checks.values()), detail)


def test_c10_inner_error(report):
    M = synth_matrix("sparse-uniform", 100, 80, density=0.02, seed=10)
    f = init_factors(100, 80, 5, 10, M)
    curves = {algo: inner_error_curve(M, f.H, f.W, algo, 10) for algo in ("hals", "mu")}
    hals, mu = curves["hals"].values, curves["mu"].values
    shape_ok = all(
        v[0] == 1.0 and np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) <= 1e-12)
        for v in (hals, mu))
    ok = hals[1] < mu[1] and shape_ok
    _verdict(report, 10, ok, f"sparse 100x80 (2%), r=5: E(1) HALS={hals[1]:.3f} < "
                             f"MU={mu[1]:.3f}; curves in [0,1] and nonincreasing: {shape_ok}")


def test_c11_delta_safeguard(report):
    M = np.ones((2, 2))
    W0, H0 = np.ones((2, 1)), np.array([[1.0, 0.0]])
    locked = run_nmf(M, W0, H0, AccelConfig(algo="mu", safeguards=Safeguards(delta=0.0),
                                            max_outer=50))
    safe = run_nmf(M, W0, H0, AccelConfig(algo="mu", max_outer=50))
    stuck = locked.factors.H[0, 1] == 0.0 and locked.errors[-1] >= math.sqrt(2) * (1 - 1e-12)
    recovers = safe.errors[-1] < 1e-6 * safe.errors[0]
    _verdict(report, 11, stuck and recovers,
             f"M=ones(2,2), r=1, H0=[1,0]: delta=0 keeps H[0,1]=0 for 50 iterations "
             f"(error {locked.errors[-1]:.4f}); delta=1e-16 error "
             f"{safe.errors[0]:.4f} -> {safe.errors[-1]:.1e}")


def test_c12_determinism_and_formats(report, tmp_path):
    def experiment(out):
        spec = ExperimentSpec(dataset=SynthSource("sparse-uniform", 60, 40, 1, 0.1, 0.0, 12),
                              rank=4, configs=[preset("mu"), preset("a-hals"), preset("a-pg")],
                              seeds=[0, 1, 2], max_outer=8, output=str(out))
        return run_experiment(spec)

    a, b = experiment(tmp_path / "a"), experiment(tmp_path / "b")
    deterministic = [t.errors for t in a.traces] == [t.errors for t in b.traces]
    lossless = True
    for tr in a.traces:
        rows = io.read_trace_csv(tmp_path / "a" / "traces" /
                                 f"{tr.config.label}_seed{tr.config.seed}.csv")
        lossless &= rows["error"] == [float(e) for e in tr.errors]
        lossless &= rows["elapsed_s"] == [float(t) for t in tr.elapsed]
        lossless &= list(zip(rows["w_inner"][1:], rows["h_inner"][1:])) == tr.inner_counts
    (tmp_path / "neg.mtx").write_text(
        "%%MatrixMarket matrix coordinate real general\n3 3 2\n1 1 1.0\n3 2 -1.0\n")
    try:
        io.load_matrix(tmp_path / "neg.mtx")
        rejected, message = False, "accepted"
    except io.MatrixFormatError as exc:
        message = str(exc)
        rejected = "(3, 2)" in message and exc.line == 4
    ok = deterministic and lossless and rejected
    _verdict(report, 12, ok, f"identical error columns on repeat: {deterministic}; trace CSV "
                             f"round-trip exact: {lossless}; negative entry rejected: "
                             f"'{message.split(': ', 1)[-1]}'")
