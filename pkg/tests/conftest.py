import itertools

import numpy as np
import pytest
import scipy.sparse as sp

_ACCEPTANCE_LINES = []


def dense_objective(M, W, H):
    """Reference ||M - WH||_F from the explicit residual."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return float(np.linalg.norm(M - W @ H))


def random_instance(rng, m, n, r, density=1.0):
    """Nonnegative data and strictly positive factors."""
    if density < 1.0:
        M = sp.random(m, n, density=density, random_state=rng,
                      data_rvs=rng.random, format="csr")
    else:
        M = rng.random((m, n))
    W = rng.random((m, r)) + 0.01
    H = rng.random((r, n)) + 0.01
    return M, W, H


def enumerate_supports(G, c):
    """Independent oracle: least squares on every support, best feasible."""
    q = G.shape[1]
    best, best_obj = np.zeros(q), float(c @ c)
    for k in range(1, q + 1):
        for idx in itertools.combinations(range(q), k):
            z = np.linalg.lstsq(G[:, idx], c, rcond=None)[0]
            if np.any(z < 0):
                continue
            x = np.zeros(q)
            x[list(idx)] = z
            obj = float(np.sum((G @ x - c) ** 2))
            if obj < best_obj:
                best, best_obj = x, obj
    return best, best_obj


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Collect one pass/fail line per acceptance criterion."""
    def add(number, passed, detail):
        _ACCEPTANCE_LINES.append(
            f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}")
    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
