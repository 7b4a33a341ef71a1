import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from analoglp import LinearProgram

# hardware LP: four inequalities in two free variables
HW_A = np.array([[5 / 12, -1.0], [5 / 2, 1.0], [-1.0, 0.0], [0.0, 1.0]])
HW_B = np.array([35 / 12, 35 / 2, 5.0, 5.0])


def hardware_lp(direction):
    """The hardware LP with ``direction`` maximised (cost ``-direction``)."""
    return LinearProgram(-np.asarray(direction, dtype=float), None, None, HW_A, HW_B)


@pytest.fixture
def hw():
    return hardware_lp


def highs(lp):
    """Independent reference optimum from scipy's HiGHS."""
    res = linprog(lp.c, A_ub=lp.a_ineq if lp.q else None, b_ub=lp.b_ineq if lp.q else None,
                  A_eq=lp.a_eq if lp.p else None, b_eq=lp.b_eq if lp.p else None,
                  bounds=[(None, None)] * lp.n, method="highs")
    return res


def small_random_lp(rng, n=None, p=None, q=None):
    """Feasible, bounded LP with a box around an interior point."""
    n = int(rng.integers(1, 6)) if n is None else n
    p = int(rng.integers(0, n)) if p is None else p
    q = int(rng.integers(1, 5)) if q is None else q
    x0 = rng.uniform(-2, 2, n)
    a_eq = rng.normal(size=(p, n))
    a_in = rng.normal(size=(q, n))
    a_ineq = np.vstack([a_in, np.eye(n), -np.eye(n)])
    b_ineq = np.concatenate([a_in @ x0 + rng.uniform(0.1, 1, q), x0 + 3, -(x0 - 3)])
    return LinearProgram(rng.normal(size=n), a_eq, a_eq @ x0, a_ineq, b_ineq)


def brute_force_qp(H, f, E, e, A, b):
    """Best KKT point over every working set (small sizes only)."""
    best = None
    q, n = A.shape[0], H.shape[0]
    for k in range(0, min(q, n) + 1):
        for S in itertools.combinations(range(q), k):
            C = np.vstack([E, A[list(S)]])
            r = np.concatenate([e, b[list(S)]])
            if len(C) and np.linalg.matrix_rank(C) < len(C):
                continue
            K = np.block([[H, C.T], [C, np.zeros((len(C), len(C)))]])
            try:
                sol = np.linalg.solve(K, np.concatenate([f, r]))
            except np.linalg.LinAlgError:
                continue
            x, lam = sol[:n], sol[n + len(E):]
            if np.all(A @ x <= b + 1e-9) and np.all(lam >= -1e-9):
                val = 0.5 * x @ H @ x - f @ x
                if best is None or val < best[0] - 1e-12:
                    best = (val, x)
    return best


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
