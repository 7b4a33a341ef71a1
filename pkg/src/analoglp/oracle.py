"""Reference LP solver used to check circuit results.

:func:`solve_lp` is a two-phase dense-tableau simplex with Bland's rule.
It is deliberately plain: deterministic, cycle free and independent of
the circuit machinery.  :func:`enumerate_vertices` is a brute-force
cross-check for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, kkt_residual

__all__ = ["OracleSolution", "solve_lp", "enumerate_vertices", "best_vertex",
           "optimal_face_range"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class OracleSolution:
    """Result of :func:`solve_lp`.

    ``lambda_star`` (inequalities) and ``mu_star`` (equalities) are
    Lagrange multipliers: ``c + A_eq' mu + A_ineq' lam = 0``, ``lam >= 0``.
    They are ``None`` unless ``status == "optimal"``.
    """

    status: str
    v_star: np.ndarray = None
    lambda_star: np.ndarray = None
    mu_star: np.ndarray = None
    cost: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, allowed, tol, max_iter):
    """Bland-rule simplex on tableau ``T`` (last row = reduced costs)."""
    m = T.shape[0] - 1
    it = 0
    while True:
        d = T[-1, :-1]
        cand = np.flatnonzero((d < -tol) & allowed)
        if cand.size == 0:
            return "optimal", it
        j = cand[0]
        col = T[:m, j]
        pos = np.flatnonzero(col > tol)
        if pos.size == 0:
            return "unbounded", it
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        r = ties[np.argmin(np.asarray(basis)[ties])]
        _pivot(T, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration cap exceeded")


def solve_lp(lp, tol=1e-10, max_iter=200000):
    """Solve ``lp`` to optimality, or report it infeasible/unbounded."""
    n, p, q = lp.n, lp.p, lp.q
    m = p + q
    # standard form over [x+, x-, s] >= 0
    a_std = np.zeros((m, 2 * n + q))
    a_std[:, :n] = lp.a
    a_std[:, n:2 * n] = -lp.a
    a_std[p + np.arange(q), 2 * n + np.arange(q)] = 1.0
    b_std = lp.b.copy()
    flip = np.where(b_std < 0, -1.0, 1.0)
    a_std *= flip[:, None]
    b_std *= flip
    nv = a_std.shape[1]

    # initial basis: slacks where usable, artificials elsewhere
    basis = []
    art_rows = []
    for i in range(m):
        if i >= p and flip[i] > 0:
            basis.append(2 * n + (i - p))
        else:
            basis.append(nv + len(art_rows))
            art_rows.append(i)
    na = len(art_rows)
    T = np.zeros((m + 1, nv + na + 1))
    T[:m, :nv] = a_std
    T[art_rows, nv + np.arange(na)] = 1.0
    T[:m, -1] = b_std
    scale = max(1.0, float(np.max(np.abs(b_std), initial=0.0)))

    iters = 0
    if na:
        # phase 1: minimise the sum of artificials
        T[-1, nv:nv + na] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        allowed = np.ones(nv + na, dtype=bool)
        _, k = _run(T, basis, allowed, tol, max_iter)
        iters += k
        if -T[-1, -1] > 1e-8 * scale:
            return OracleSolution(INFEASIBLE, iterations=iters)
        # drive artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= nv:
                mag = np.abs(T[r, :nv])
                j = int(np.argmax(mag))
                if mag[j] > 1e-9:
                    _pivot(T, r, j)
                    basis[r] = j
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        T = np.vstack([T[rows], T[-1:]])
        basis = [basis[r] for r in rows]
        T = np.hstack([T[:, :nv], T[:, -1:]])
    else:
        rows = np.arange(m)
        T = np.hstack([T[:, :nv], T[:, -1:]])

    c_std = np.concatenate([lp.c, -lp.c, np.zeros(q)])
    cb = c_std[basis]
    T[-1, :-1] = c_std - cb @ T[:-1, :-1]
    T[-1, -1] = -cb @ T[:-1, -1]
    status, k = _run(T, basis, np.ones(nv, dtype=bool), tol, max_iter)
    iters += k
    if status == UNBOUNDED:
        return OracleSolution(UNBOUNDED, iterations=iters)

    # refine the basic solution and multipliers on the original data
    bmat = a_std[np.ix_(rows, basis)]
    x = np.zeros(nv)
    x[basis] = np.linalg.solve(bmat, b_std[rows])
    y_rows = np.linalg.solve(bmat.T, c_std[basis])
    y = np.zeros(m)
    y[rows] = y_rows
    y *= flip
    v = x[:n] - x[n:2 * n]
    mu = -y[:p]
    lam = -y[p:]
    lam = np.where((lam < 0) & (lam > -1e-9), 0.0, lam)
    return OracleSolution(OPTIMAL, v, lam, mu, float(lp.c @ v), iters)


def enumerate_vertices(lp, tol=1e-9):
    """All feasible basic solutions of ``lp``, duplicates removed.

    Limited to ``n <= 12`` and ``p + q <= 25``.
    """
    n, p, q = lp.n, lp.p, lp.q
    if n > 12 or p + q > 25:
        raise ValueError("instance too large for vertex enumeration (n <= 12, p + q <= 25)")
    rank_eq = np.linalg.matrix_rank(lp.a_eq) if p else 0
    need = n - rank_eq
    out = []
    if need > q:
        return out
    scale = max(1.0, float(np.max(np.abs(lp.b), initial=0.0)))
    for subset in itertools.combinations(range(q), need):
        mat = np.vstack([lp.a_eq, lp.a_ineq[list(subset)]])
        rhs = np.concatenate([lp.b_eq, lp.b_ineq[list(subset)]])
        if np.linalg.matrix_rank(mat) < n:
            continue
        v = np.linalg.lstsq(mat, rhs, rcond=None)[0]
        if np.max(np.abs(mat @ v - rhs)) > tol * scale * 10:
            continue
        if lp.violation(v) > tol * scale * 10:
            continue
        if any(np.max(np.abs(v - w)) <= tol * max(1.0, np.max(np.abs(w))) for w in out):
            continue
        out.append(v)
    return out


def best_vertex(lp, tol=1e-9):
    """Lowest-cost vertex and the list of vertices attaining it."""
    verts = enumerate_vertices(lp, tol)
    if not verts:
        return None, []
    costs = np.array([lp.cost(v) for v in verts])
    best = costs.min()
    ties = [v for v, cval in zip(verts, costs) if cval <= best + 1e-9 * max(1.0, abs(best))]
    return verts[int(np.argmin(costs))], ties


def optimal_face_range(lp, index, tol=1e-9):
    """Range ``(lo, hi)`` of variable ``index`` over the optimal set of ``lp``."""
    sol = solve_lp(lp)
    if not sol.optimal:
        raise ValueError(f"LP is {sol.status}")
    bound = sol.cost + tol * max(1.0, abs(sol.cost))
    a_ineq = np.vstack([lp.a_ineq, lp.c])
    b_ineq = np.concatenate([lp.b_ineq, [bound]])
    e = np.zeros(lp.n)
    e[index] = 1.0
    lo = solve_lp(LinearProgram(e, lp.a_eq, lp.b_eq, a_ineq, b_ineq))
    hi = solve_lp(LinearProgram(-e, lp.a_eq, lp.b_eq, a_ineq, b_ineq))
    return lo.cost, -hi.cost


def certify(lp, sol, tol=1e-9):
    """KKT residual of an oracle solution (inf when not optimal)."""
    if not sol.optimal:
        return float("inf")
    return kkt_residual(lp, sol.v_star, sol.lambda_star, sol.mu_star).max
