"""Dual active-set solver for convex QPs with linear constraints.

Solves::

    min 1/2 x'Hx - f'x   s.t.   E x = e,   A x <= b

with ``H`` positive semidefinite and positive definite on ``null(E)``.
This is the Goldfarb-Idnani scheme: start from the equality-constrained
minimiser (every inequality inactive), repeatedly take the most violated
inequality and raise its multiplier until it becomes active, releasing
working constraints whose multipliers would turn negative on the way.
Each step keeps dual feasibility, so the method terminates without
cycling in exact arithmetic.

In circuit language an inequality multiplier is a diode current scaled by
the row conductance; "active" is a conducting diode.

All work is done in multiplier space through ``M = C H~^{-1} C'`` (``C``
the row-normalised constraint matrix, ``H~ = H + rho E'E``), with an
incrementally maintained Cholesky factor of the working block of ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.linalg import solve_triangular as _solve_triangular

from .errors import ConvergenceError, InfeasibleError, StructuralError

FEAS_TOL = 1e-11
DEP_TOL = 1e-8


@dataclass
class QpResult:
    x: np.ndarray
    mult_eq: np.ndarray
    mult_ineq: np.ndarray
    active: np.ndarray          # indices of inequality rows in the working set
    iterations: int
    trace: list = field(default_factory=list)


def solve_triangular(a, b, lower=False):
    return _solve_triangular(a, b, lower=lower, check_finite=False)


def _chol_append(L, col, diag):
    k = L.shape[0]
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = L
    out[k, :k] = col
    out[k, k] = diag
    return out


def _chol_update(T, x):
    """In-place rank-one update ``T T' + x x'`` of a lower Cholesky factor."""
    r = T.shape[0]
    for i in range(r):
        a = T[i, i]
        b = x[i]
        rr = np.hypot(a, b)
        c = rr / a
        s = b / a
        T[i, i] = rr
        if i + 1 < r:
            T[i + 1:, i] = (T[i + 1:, i] + s * x[i + 1:]) / c
            x[i + 1:] = c * x[i + 1:] - s * T[i + 1:, i]


def _chol_delete(L, j):
    L = np.delete(L, j, axis=0)
    x = L[j:, j].copy()
    L = np.delete(L, j, axis=1)
    if x.size:
        _chol_update(L[j:, j:], x)
    return L


def solve_qp(H, f, E, e, A, b, max_iter=None, keep_trace=False):
    """Solve the QP above; see the module docstring.

    Multipliers follow ``H x - f + E' mu + A' lam = 0`` with ``lam >= 0``.

    Raises
    ------
    StructuralError
        ``H`` is not positive definite on ``null(E)``.
    InfeasibleError
        The constraints are inconsistent.
    ConvergenceError
        The iteration cap was reached.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    E = np.asarray(E, dtype=float).reshape(-1, n)
    A = np.asarray(A, dtype=float).reshape(-1, n)
    e = np.asarray(e, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    f = np.asarray(f, dtype=float).reshape(-1)
    p, q = E.shape[0], A.shape[0]

    C = np.vstack([E, A])
    rhs = np.concatenate([e, b])
    norms = np.linalg.norm(C, axis=1)
    if np.any(norms == 0):
        zero = np.flatnonzero(norms == 0)
        bad = zero[np.abs(rhs[zero]) > 0]
        bad_eq = bad[bad < p]
        bad_in = bad[(bad >= p) & (rhs[bad] < 0)]
        if bad_eq.size or bad_in.size:
            raise InfeasibleError("a zero constraint row has an unsatisfiable right-hand side")
        norms = np.where(norms == 0, 1.0, norms)
    C = C / norms[:, None]
    rhs = rhs / norms
    En = C[:p]

    rho = max(float(np.max(np.abs(np.diag(H)), initial=0.0)), 1e-12)
    Ht = H + rho * En.T @ En
    ft = f + rho * En.T @ rhs[:p]
    try:
        L = cholesky(Ht, lower=True)
    except np.linalg.LinAlgError as exc:
        raise StructuralError("Hessian is singular on the equality-feasible subspace") from exc

    R = solve_triangular(L, C.T, lower=True)          # n x (p+q)
    z = solve_triangular(L, ft, lower=True)
    g = R.T @ z                                        # constraint values at the free minimiser
    M = R.T @ R
    diagM = np.diag(M).copy()
    scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)),
                float(np.max(np.abs(g), initial=0.0)))
    feas_tol = FEAS_TOL * scale

    W = []                    # working rows (indices into C)
    w = np.zeros(0)           # their multipliers
    Lw = np.zeros((0, 0))
    is_eq = np.zeros(p + q, dtype=bool)
    is_eq[:p] = True
    trace = []
    iters = 0
    # rows found linearly dependent on the working set with a violation at
    # rounding level; treated as satisfied until the working set grows.
    # Such a row may already carry a multiplier from partial steps; it is
    # kept as a fixed "ghost" force folded into g until it re-enters.
    tolerated = np.zeros(q, dtype=bool)
    ghost = np.zeros(p + q)
    dep_tol = 1e-8 * scale
    if max_iter is None:
        max_iter = 20 * (n + p + q) + 200

    def schur(j):
        if W:
            l = solve_triangular(Lw, M[W, j], lower=True)
            d = -solve_triangular(Lw.T, l, lower=False)
            sigma = diagM[j] - l @ l
        else:
            l = np.zeros(0)
            d = np.zeros(0)
            sigma = diagM[j]
        return l, d, sigma

    # equalities first: multipliers unrestricted, no blocking
    for j in range(p):
        l, d, sigma = schur(j)
        value = g[j] - (M[j, W] @ w if W else 0.0)
        resid = value - rhs[j]
        if sigma <= DEP_TOL * diagM[j]:
            if abs(resid) > 1e-9 * scale:
                raise InfeasibleError(f"equality row {j} is inconsistent with the others")
            continue
        t = resid / sigma
        w = np.concatenate([w + t * d, [t]])
        W.append(j)
        Lw = _chol_append(Lw, l, np.sqrt(sigma))
        iters += 1

    # inequalities
    while True:
        if q == 0:
            break
        vals = g[p:] - (M[p:, W] @ w if W else 0.0)
        slack = rhs[p:] - vals
        slack[tolerated] = np.inf
        jj = int(np.argmin(slack))
        if slack[jj] >= -feas_tol:
            break
        j = p + jj
        tj = ghost[j]
        if tj:
            g = g + M[:, j] * tj
            ghost[j] = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                raise ConvergenceError("active-set iteration cap reached",
                                       residuals={"max_violation": float(-slack.min())},
                                       trace=trace)
            l, d, sigma = schur(j)
            value = g[j] - (M[j, W] @ w if W else 0.0) - diagM[j] * tj
            viol = value - rhs[j]
            dependent = sigma <= DEP_TOL * diagM[j]
            t2 = np.inf if dependent else max(viol, 0.0) / sigma
            t1 = np.inf
            k_drop = -1
            for pos, row in enumerate(W):
                if is_eq[row] or d[pos] >= -1e-14:
                    continue
                ratio = max(w[pos], 0.0) / -d[pos]
                if ratio < t1:
                    t1 = ratio
                    k_drop = pos
            if not np.isfinite(t1) and not np.isfinite(t2):
                if viol <= dep_tol:
                    tolerated[jj] = True
                    if tj:
                        ghost[j] = tj
                        g = g - M[:, j] * tj
                    break
                raise InfeasibleError(f"inequality row {jj} cannot be satisfied")
            if t2 <= t1:
                w = np.concatenate([w + t2 * d, [tj + t2]])
                W.append(j)
                Lw = _chol_append(Lw, l, np.sqrt(sigma))
                tolerated[:] = False
                if keep_trace:
                    trace.append(("on", jj))
                break
            w = w + t1 * d
            tj += t1
            dropped = W.pop(k_drop)
            w = np.delete(w, k_drop)
            Lw = _chol_delete(Lw, k_drop)
            if keep_trace:
                trace.append(("off", dropped - p))

    # primal point and two rounds of iterative refinement on the working set
    CW = C[W]
    ft = ft - C.T @ ghost
    x = cho_solve((L, True), ft - CW.T @ w)
    for _ in range(2):
        r1 = Ht @ x - ft + CW.T @ w
        r2 = CW @ x - rhs[W]
        if not W:
            x = x - cho_solve((L, True), r1)
            continue
        y = solve_triangular(L, r1, lower=True)
        t = r2 - R[:, W].T @ y
        dw = solve_triangular(Lw.T, solve_triangular(Lw, t, lower=True), lower=False)
        dx = cho_solve((L, True), -r1 - CW.T @ dw)
        x = x + dx
        w = w + dw

    mult = np.zeros(p + q)
    if W:
        mult[W] = w
    mult = (mult + ghost) / norms
    active = np.array(sorted(set(r - p for r in W if r >= p)
                             | set(np.flatnonzero(ghost[p:] > 0).tolist())), dtype=int)
    return QpResult(x, mult[:p], mult[p:], active, iters, trace)
