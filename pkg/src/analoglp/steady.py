"""Steady state of the LP circuit and the equivalence checks built on it.

The DC equations of the network (KCL at every node, the negative
resistance law and ideal-diode complementarity) are exactly the KKT
conditions of the convex QP::

    min  1/2 V'HV - u_cost c'V
    s.t. A_eq V = b_eq,   A_ineq V <= b_ineq,   V_j = forced_j

with ``H = diag(c) + diag(A'1) - A' S^-1 A`` and ``S = diag(A 1)``.  Given
QP multipliers ``lam`` (one per constraint row) the circuit quantities
are ``I = S lam`` and ``U = S^-1 A V - lam``.  ``H`` is positive
semidefinite by Cauchy-Schwarz, so the diode partition can be found with
a finite dual active-set method instead of flipping diodes by hand.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from ._activeset import solve_qp
from .circuit import Circuit, compile, compile_primal_dual
from .errors import (AssumptionError, ConvergenceError, InfeasibleError,
                     StructuralError)
from .lp import CanonicalLP, LinearProgram, canonicalize, kkt_residual

__all__ = [
    "SteadyState",
    "QpConstruction",
    "EquivalenceReport",
    "hessian",
    "steady_state_residuals",
    "solve_steady_state",
    "solve_partition",
    "solve_exhaustive",
    "solve_nocost_qp",
    "compute_ucrit",
    "cost_sensitivity",
    "reconstruct_duals",
    "optimality_residual",
    "verify_equivalence",
]

RESIDUAL_TOL = 1e-8
EXHAUSTIVE_LIMIT = 14
# breakpoint budget for the multiplier homotopy before falling back to a
# bracketing search; long paths are cheaper to bisect
TRACK_STEPS = 200


@dataclass(frozen=True)
class SteadyState:
    """DC operating point.

    ``i[k]`` is the current drawn by constraint row ``k`` (``b - s U`` on
    conducting rows); ``active_set`` lists the constraint rows whose diode
    conducts.  ``forced_current`` maps forced variable nodes to the
    current their source delivers.
    """

    v: np.ndarray
    u: np.ndarray
    i: np.ndarray
    i_cost: float
    u_cost: float
    active_set: np.ndarray
    forced_current: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def cost(self):
        """Value of ``c'V`` for the circuit's own cost row (set by the solver)."""
        return self._cost

    def residuals(self, circuit):
        return steady_state_residuals(circuit, self)


def hessian(circuit):
    """``diag(c) + diag(A'1) - A' S^-1 A`` for the circuit's conductances."""
    a = circuit.a
    s = circuit.row_sums
    return np.diag(circuit.c + a.sum(axis=0)) - a.T @ (a / s[:, None])


def _qp_blocks(circuit):
    """Equality block (equality rows, forced nodes) and inequality block."""
    a, b = circuit.a, circuit.b
    eq = circuit.eq_rows
    ineq = circuit.ineq_rows
    forced = sorted(circuit.forced_nodes)
    F = np.zeros((len(forced), circuit.n))
    F[np.arange(len(forced)), forced] = 1.0
    E = np.vstack([a[eq], F])
    e = np.concatenate([b[eq], [circuit.forced_nodes[j] for j in forced]])
    return E, e, a[ineq], b[ineq], forced


def _state_from_multipliers(circuit, u_cost, v, lam_rows, nu, active, iters):
    a, s = circuit.a, circuit.row_sums
    u = (a @ v) / s - lam_rows
    cur = s * lam_rows
    forced = sorted(circuit.forced_nodes)
    st = SteadyState(v=v, u=u, i=cur, i_cost=float(circuit.c @ v - circuit.c.sum() * u_cost),
                     u_cost=float(u_cost), active_set=np.asarray(active, dtype=int),
                     forced_current={j: float(x) for j, x in zip(forced, nu)},
                     iterations=iters)
    object.__setattr__(st, "_cost", float(circuit.c @ v))
    return st


def _assemble(circuit, u_cost, x, mult_eq, mult_ineq, active_ineq, iters):
    eq = circuit.eq_rows
    ineq = circuit.ineq_rows
    lam_rows = np.zeros(circuit.m)
    lam_rows[eq] = mult_eq[:len(eq)]
    lam_rows[ineq] = mult_ineq
    # exact zeros on blocking rows keep complementarity clean
    blocking = np.setdiff1d(np.arange(len(ineq)), active_ineq)
    lam_rows[ineq[blocking]] = 0.0
    lam_rows[ineq] = np.maximum(lam_rows[ineq], 0.0)
    active = ineq[np.asarray(active_ineq, dtype=int)] if len(active_ineq) else np.zeros(0, int)
    nu = mult_eq[len(eq):]
    return _state_from_multipliers(circuit, u_cost, x, lam_rows, nu, np.sort(active), iters)


def _solve_convex(H, f, E, e, A, b, keep_trace=False):
    """``solve_qp`` with a proximal-point fallback for singular ``H``."""
    try:
        return solve_qp(H, f, E, e, A, b, keep_trace=keep_trace)
    except StructuralError:
        pass
    # H is only semidefinite on the feasible subspace: add a shrinking
    # proximal term around the running iterate until it stops moving
    n = H.shape[0]
    delta = 1e-6 * max(1.0, float(np.max(np.abs(np.diag(H)), initial=1.0)))
    x = np.zeros(n)
    res = None
    for _ in range(500):
        res = solve_qp(H + delta * np.eye(n), f + delta * x, E, e, A, b, keep_trace=keep_trace)
        step = np.max(np.abs(res.x - x), initial=0.0)
        x = res.x
        if step <= 1e-13 * max(1.0, np.max(np.abs(x), initial=0.0)):
            break
    else:
        raise ConvergenceError("proximal iteration did not settle",
                               residuals={"step": float(step)})
    return res


def _solve_soft(H, f, E, e, A, b, soft, keep_trace=False, max_eval=200):
    """Equality row ``soft`` of ``E`` enforced through its multiplier.

    Used for a row whose multiplier is not unique (the row is implied by
    the others at the solution), where the plain active-set iteration can
    drift along an unbounded multiplier ray.  With the row removed and
    ``mu * a`` added to the objective, the residual ``r(mu) = a x(mu) - e``
    is continuous, piecewise linear and non-increasing in ``mu``.  Every
    root is an exact solution; the smallest one is returned, found by
    bracketing, bisection and secant steps from the left.
    """
    if len(soft) != 1:
        raise ValueError("exactly one soft row is supported")
    k = int(soft[0])
    hard = np.setdiff1d(np.arange(E.shape[0]), [k])
    a, target = E[k], e[k]
    Eh, eh = E[hard], e[hard]

    def probe(mu):
        res = _solve_convex(H, f - mu * a, Eh, eh, A, b, keep_trace=keep_trace)
        return res, float(a @ res.x - target)

    res0, r0 = probe(0.0)
    xscale = max(1.0, float(np.max(np.abs(res0.x), initial=0.0)), abs(target))
    tol = 1e-11 * xscale * float(np.abs(a).sum())
    evals = 1
    mu = _track_root(H, f, a, target, Eh, eh, A, b, res0.active, r0 > tol, tol,
                     lambda m: probe(m)[0], max_steps=TRACK_STEPS)
    if mu is not None:
        res, r = probe(mu)
        if r <= 10 * tol:
            return _pack_soft(res, hard, k, mu, E.shape[0])
    lo = hi = None                 # lo: r > tol, hi: r <= tol
    if r0 > tol:
        lo = (0.0, r0, res0)
        step = 1.0
        while hi is None:
            res, r = probe(lo[0] + step)
            evals += 1
            if r > tol:
                lo = (lo[0] + step, r, res)
            else:
                hi = (lo[0] + step, r, res)
            step *= 4.0
            if evals > max_eval:
                raise ConvergenceError("multiplier search did not bracket a root",
                                       residuals={"gap": r})
    else:
        hi = (0.0, r0, res0)
        step = 1.0
        while lo is None and step < 1e12:
            res, r = probe(hi[0] - step)
            evals += 1
            if r > tol:
                lo = (hi[0] - step, r, res)
            else:
                hi = (hi[0] - step, r, res)
            step *= 4.0
        if lo is None:
            # the row never binds over any reasonable multiplier range
            return _pack_soft(hi[2], hard, k, hi[0], E.shape[0])

    def newton(point):
        # slope of r on the working set of ``point``
        mu, r, res = point
        C = np.vstack([Eh, A[res.active]])
        n, m = H.shape[0], C.shape[0]
        K = np.block([[H, C.T], [C, np.zeros((m, m))]])
        rhs = np.concatenate([-a, np.zeros(m)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=1e-13)[0]
        slope = float(a @ sol[:n])
        return mu - r / slope if slope < 0 else None

    while hi[0] - lo[0] > 1e-10 * max(1.0, abs(hi[0])) and evals < max_eval:
        guess = newton(lo)
        if guess is None or not lo[0] < guess < hi[0]:
            guess = 0.5 * (lo[0] + hi[0])
        res, r = probe(guess)
        evals += 1
        if r > tol:
            lo = (guess, r, res)
            continue
        hi = (guess, r, res)
        # Newton from the left stops on the first root; confirm just left of it
        left = guess - 1e-12 * max(1.0, abs(guess))
        if left > lo[0]:
            res, r = probe(left)
            evals += 1
            if r > tol:
                lo = (left, r, res)
            else:
                hi = (left, r, res)
    return _pack_soft(hi[2], hard, k, hi[0], E.shape[0])


def _track_root(H, f, a, target, E, e, A, b, active, seeking, tol, resync, max_steps=None):
    """Follow the multiplier path of the soft row from ``mu = 0``.

    With the working set fixed, ``x`` and the working multipliers are
    affine in ``mu``; the path is followed from breakpoint to breakpoint
    (a blocking row becomes tight or a working multiplier reaches zero).
    When ``seeking`` is true the residual is positive at ``mu = 0`` and
    the path runs upward to the first root; otherwise ``mu = 0`` is a root
    and the path runs downward to the left end of the root set.  At a
    degenerate breakpoint the working set is taken from ``resync(mu)``, a
    full solve just past it.  Returns ``None`` when the path cannot be
    followed; the caller then falls back to bisection.
    """
    n, q = H.shape[0], A.shape[0]
    working = np.zeros(q, dtype=bool)
    working[np.asarray(active, dtype=int)] = True
    p = E.shape[0]
    mu = 0.0
    sign = 1.0 if seeking else -1.0
    if max_steps is None:
        max_steps = 4 * q + 20
    bscale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    resyncs = 0
    expected = None                # r predicted from the previous piece

    def jump():
        nonlocal mu, resyncs, expected
        resyncs += 1
        expected = None
        mu = mu + sign * 1e-9 * max(1.0, abs(mu))
        working[:] = False
        working[resync(mu).active] = True

    for _ in range(max_steps):
        if resyncs > 50:
            return None
        rows = np.flatnonzero(working)
        C = np.vstack([E, A[rows]])
        m = C.shape[0]
        K = np.block([[H, C.T], [C, np.zeros((m, m))]])
        rhs = np.column_stack([np.concatenate([f - mu * a, e, b[rows]]),
                               np.concatenate([-a, np.zeros(m)])])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            jump()
            continue
        x, dx = sol[:n, 0], sol[:n, 1] * sign
        lam, dlam = sol[n + p:, 0], sol[n + p:, 1] * sign
        r = float(a @ x - target)
        slope = float(a @ dx) * sign
        if expected is not None and abs(r - expected) > 1e-7 * max(1.0, abs(expected)):
            # r is continuous in mu: a jump means the working set is wrong
            jump()
            continue
        # step lengths to the next breakpoint along the direction of travel
        steps = [np.inf]
        idle = np.flatnonzero(~working)
        if idle.size:
            rate = A[idle] @ dx
            slack = b[idle] - A[idle] @ x
            hit = rate > 1e-14 * bscale
            if hit.any():
                steps.append(float(np.min(np.maximum(slack[hit], 0.0) / rate[hit])))
        if rows.size:
            fall = dlam < -1e-14 * max(1.0, float(np.max(np.abs(lam))))
            if fall.any():
                steps.append(float(np.min(np.maximum(lam[fall], 0.0) / -dlam[fall])))
        t_event = min(steps)
        if seeking:
            # r never increases in theory, so a non-negative slope means
            # drift has hidden the root we are sitting on (checked by caller)
            if r <= tol or slope >= 0:
                return mu
            if -r / slope <= t_event:
                return mu + (-r / slope)
        elif slope * sign > 1e-12 * max(1.0, abs(r)):
            # moving left the residual starts to grow: left end reached
            return mu
        if not np.isfinite(t_event):
            return None if seeking else mu
        mu += sign * t_event
        expected = r + slope * t_event * sign
        xe = x + t_event * dx
        lame = lam + t_event * dlam
        tight = idle[(A[idle] @ xe - b[idle]) >= -1e-12 * bscale] if idle.size else idle
        tight = tight[(A[tight] @ dx) > 1e-14 * bscale] if tight.size else tight
        if rows.size:
            zero = rows[(lame <= 1e-12 * max(1.0, float(np.max(np.abs(lam))))) & (dlam < 0)]
        else:
            zero = rows
        working[zero] = False
        if tight.size:
            # one row at a time keeps the working set independent
            working[tight[np.argmax(A[tight] @ dx)]] = True
    return None


def _pack_soft(res, hard, k, mu, p):
    mult_eq = np.zeros(p)
    mult_eq[hard] = res.mult_eq
    mult_eq[k] = mu
    res.mult_eq = mult_eq
    return res


def solve_steady_state(circuit, u_cost, keep_trace=False, soft_rows=()):
    """DC operating point of ``circuit`` with the cost node at ``u_cost``.

    ``soft_rows`` lists equality constraint rows (circuit row indices,
    ``0..m-1``) that are redundant at the solution; they are handled by an
    augmented Lagrangian so their currents stay finite.

    Raises
    ------
    InfeasibleError
        The equality block (or the constraint set) admits no solution.
    ConvergenceError
        The active-set iteration hit its cap and the exhaustive search
        was out of reach; carries the last trace.
    """
    if not np.isfinite(u_cost):
        raise ValueError("u_cost must be finite")
    H = hessian(circuit)
    E, e, A, b, _ = _qp_blocks(circuit)
    f = u_cost * circuit.c
    soft = [int(np.flatnonzero(circuit.eq_rows == r)[0]) for r in soft_rows]
    try:
        if soft:
            res = _solve_soft(H, f, E, e, A, b, soft, keep_trace=keep_trace)
        else:
            res = _solve_convex(H, f, E, e, A, b, keep_trace=keep_trace)
    except ConvergenceError:
        if len(circuit.ineq_rows) <= EXHAUSTIVE_LIMIT:
            return solve_exhaustive(circuit, u_cost)
        raise
    return _assemble(circuit, u_cost, res.x, res.mult_eq, res.mult_ineq, res.active,
                     res.iterations)


def solve_partition(circuit, u_cost, active):
    """Operating point for a fixed diode partition, or ``None`` if inconsistent.

    ``active`` holds positions within the inequality block whose diodes
    conduct.  The result is returned only when the conducting currents
    are non-negative and the blocking rows are satisfied.
    """
    H = hessian(circuit)
    E, e, A, b, _ = _qp_blocks(circuit)
    active = np.asarray(sorted(active), dtype=int)
    C = np.vstack([E, A[active]])
    d = np.concatenate([e, b[active]])
    n, k = H.shape[0], C.shape[0]
    K = np.block([[H, C.T], [C, np.zeros((k, k))]])
    rhs = np.concatenate([u_cost * circuit.c, d])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=1e-12)
    scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
    if np.max(np.abs(K @ sol - rhs)) > 1e-9 * scale:
        return None
    x = sol[:n]
    mult = sol[n:]
    lam = mult[E.shape[0]:]
    if lam.size and lam.min() < -1e-9 * scale:
        return None
    blocking = np.setdiff1d(np.arange(A.shape[0]), active)
    if blocking.size and np.max(A[blocking] @ x - b[blocking]) > 1e-9 * scale:
        return None
    mult_ineq = np.zeros(A.shape[0])
    mult_ineq[active] = lam
    return _assemble(circuit, u_cost, x, mult[:E.shape[0]], mult_ineq, active, 0)


def solve_exhaustive(circuit, u_cost):
    """Try every diode partition, smallest conducting set first.

    Exponential in the number of inequality rows; a cross-check and
    last-resort fallback for small circuits.
    """
    q = len(circuit.ineq_rows)
    if q > EXHAUSTIVE_LIMIT + 6:
        raise ValueError(f"{q} diodes is too many for exhaustive search")
    for size in range(q + 1):
        for active in itertools.combinations(range(q), size):
            st = solve_partition(circuit, u_cost, active)
            if st is not None:
                return st
    raise InfeasibleError("no diode partition satisfies the circuit equations")


def steady_state_residuals(circuit, state):
    """Residual groups of the DC equations, each scaled to unit data.

    Keys: ``constraint_kcl`` (A V = S U + I), ``variable_kcl``
    (c u + A'U = diag(c + A'1) V, forced nodes excluded), ``feasibility``
    (equality and inequality rows), ``complementarity`` (I >= 0 and
    I * slack = 0 on diode rows) and ``cost`` (c'V = (1'c) u + I_cost).
    """
    a, b, c = circuit.a, circuit.b, circuit.c
    s = circuit.row_sums
    v, u, cur = state.v, state.u, state.i
    big = lambda *xs: max(1.0, *(float(np.max(np.abs(x), initial=0.0)) for x in xs))

    av = a @ v
    r_a = np.max(np.abs(av - s * u - cur), initial=0.0) / big(av, s * u, cur)

    lhs = c * state.u_cost + a.T @ u
    rhs = (c + a.sum(axis=0)) * v
    mask = np.ones(circuit.n, dtype=bool)
    mask[list(circuit.forced_nodes)] = False
    r_b = np.max(np.abs(lhs - rhs)[mask], initial=0.0) / big(c * state.u_cost, a.T @ u, rhs)

    eq, ineq = circuit.eq_rows, circuit.ineq_rows
    scale_b = big(b, av)
    r_eq = np.max(np.abs(av[eq] - b[eq]), initial=0.0)
    r_in = np.max(av[ineq] - b[ineq], initial=0.0)
    r_forced = max((abs(v[j] - x) for j, x in circuit.forced_nodes.items()), default=0.0)
    r_cd = max(r_eq, r_in, 0.0, r_forced) / scale_b

    cur_in = cur[ineq]
    slack = av[ineq] - b[ineq]
    r_ef = max(float(np.max(-cur_in, initial=0.0)) / big(cur),
               float(np.max(np.abs(cur_in * slack), initial=0.0)) / (big(cur) * scale_b))

    cv = float(c @ v)
    r_g = abs(cv - c.sum() * state.u_cost - state.i_cost) / big(cv, c.sum() * state.u_cost)
    return {"constraint_kcl": float(r_a), "variable_kcl": float(r_b), "feasibility": float(r_cd),
            "complementarity": float(r_ef), "cost": float(r_g)}


# -- cost-free QP construction -----------------------------------------------

@dataclass(frozen=True)
class QpConstruction:
    """Solution of the cost-free QP and the circuit quantities built from it.

    ``q`` is ``diag(A'1) - A_eq' S_eq^-1 A_eq - A_ineq' S_ineq^-1 A_ineq``.
    The multipliers satisfy ``q V + A_eq' mu + A_ineq' lam = 0``.
    """

    q: np.ndarray
    v_star: np.ndarray
    mu_star: np.ndarray
    lambda_star: np.ndarray
    u_eq: np.ndarray
    u_ineq: np.ndarray
    i_eq: np.ndarray
    i_ineq: np.ndarray
    circuit: Circuit = None

    def state(self):
        c = self.circuit
        u = np.zeros(c.m)
        cur = np.zeros(c.m)
        u[c.eq_rows], u[c.ineq_rows] = self.u_eq, self.u_ineq
        cur[c.eq_rows], cur[c.ineq_rows] = self.i_eq, self.i_ineq
        active = c.ineq_rows[self.lambda_star > 0]
        st = SteadyState(self.v_star, u, cur, 0.0, 0.0, active)
        object.__setattr__(st, "_cost", 0.0)
        return st

    def residuals(self):
        """Residual groups of the cost-free DC equations (see steady_state_residuals)."""
        return steady_state_residuals(self.circuit.without_cost(), self.state())


def solve_nocost_qp(circuit):
    """Solve the cost-free QP of ``circuit`` and map it to circuit quantities.

    The cost row is ignored.  Feasibility of the constraint set is checked
    with the reference LP solver first so an infeasible set is reported as
    such rather than as a QP failure.

    Raises
    ------
    InfeasibleError
        The constraint set is empty.
    ConvergenceError
        The QP solve failed; carries the active-set trace.
    """
    bare = circuit.without_cost()
    lp = bare.to_lp()
    probe = oracle.solve_lp(lp)
    if probe.status == oracle.INFEASIBLE:
        raise InfeasibleError("constraint set is empty")
    a_eq, a_in = lp.a_eq, lp.a_ineq
    s_eq, s_in = a_eq.sum(axis=1), a_in.sum(axis=1)
    q = (np.diag(circuit.a.sum(axis=0)) - a_eq.T @ (a_eq / s_eq[:, None])
         - a_in.T @ (a_in / s_in[:, None]))
    E, e, A, b, _ = _qp_blocks(bare)
    try:
        res = _solve_convex(q, np.zeros(circuit.n), E, e, A, b, keep_trace=True)
    except ConvergenceError as exc:
        raise ConvergenceError(f"cost-free QP failed: {exc}", exc.residuals, exc.trace) from exc
    p = lp.p
    mu = res.mult_eq[:p]
    lam = np.zeros(lp.q)
    lam[res.active] = np.maximum(res.mult_ineq[res.active], 0.0)
    v = res.x
    return QpConstruction(
        q=q, v_star=v, mu_star=mu, lambda_star=lam,
        u_eq=(a_eq @ v) / s_eq - mu, u_ineq=(a_in @ v) / s_in - lam,
        i_eq=s_eq * mu, i_ineq=s_in * lam, circuit=bare)


# -- critical voltage, sensitivity, equivalence -----------------------------

def _check_assumptions(lp):
    sol = oracle.solve_lp(lp)
    if sol.status == oracle.INFEASIBLE:
        raise AssumptionError("primal LP is infeasible", which="primal")
    if sol.status == oracle.UNBOUNDED:
        raise AssumptionError("primal LP is unbounded, so its dual is infeasible", which="dual")
    return sol


def compute_ucrit(problem, check=True):
    """Critical cost voltage of an LP.

    Solves the cost-free primal-dual circuit and returns the voltage of its
    zero-gap constraint node.  ``problem`` is a :class:`LinearProgram`
    (canonicalised as for :func:`~analoglp.circuit.compile`), a
    :class:`CanonicalLP` or a :class:`Circuit`.

    Raises
    ------
    AssumptionError
        The primal is infeasible (``which="primal"``) or unbounded, i.e.
        the dual is infeasible (``which="dual"``).
    """
    if check:
        if isinstance(problem, Circuit):
            lp = problem.to_lp()
        elif isinstance(problem, CanonicalLP):
            lp = problem.inner
        else:
            lp = problem
        _check_assumptions(lp)
    pd = compile_primal_dual(problem)
    try:
        st = solve_steady_state(pd.circuit, 0.0, soft_rows=[pd.gap_port - 1])
    except InfeasibleError as exc:
        raise AssumptionError(f"primal-dual circuit has no operating point: {exc}",
                              which="primal") from exc
    return float(st.u[pd.gap_port - 1])


def cost_sensitivity(circuit, u_cost, delta):
    """Finite-difference slope of ``c'V`` with respect to the cost voltage."""
    if delta == 0:
        raise ValueError("delta must be non-zero")
    a = solve_steady_state(circuit, u_cost)
    b = solve_steady_state(circuit, u_cost + delta)
    return float(circuit.c @ (b.v - a.v)) / delta


def _cost_derivative(circuit, state):
    """``(dV, dmult)`` of the operating point per volt of cost voltage.

    Taken on the diode partition of ``state``; ``dmult`` stacks equality
    rows, forced nodes and conducting inequality rows.
    """
    H = hessian(circuit)
    E, _, A, _, _ = _qp_blocks(circuit)
    act_pos = np.flatnonzero(np.isin(circuit.ineq_rows, state.active_set))
    C = np.vstack([E, A[act_pos]])
    n, k = H.shape[0], C.shape[0]
    K = np.block([[H, C.T], [C, np.zeros((k, k))]])
    rhs = np.concatenate([circuit.c, np.zeros(k)])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=1e-12)
    return sol[:n], sol[n:], E.shape[0], act_pos


def reconstruct_duals(circuit, state):
    """LP multipliers ``(lam, mu)`` of ``circuit.to_lp()`` read from the circuit.

    Along the conducting branch of operating points the circuit
    multipliers move as ``lam(u) = lam0 - u * m`` with ``m`` the LP
    multipliers, so ``m`` is minus the derivative of the diode/equality
    currents (divided by the row conductances) with respect to the cost
    voltage, taken on the final diode partition.  Forced nodes count as
    equality rows and their multipliers are dropped.
    """
    _, dmult, n_eq, act_pos = _cost_derivative(circuit, state)
    mu = -dmult[:len(circuit.eq_rows)]
    lam = np.zeros(len(circuit.ineq_rows))
    lam[act_pos] = -dmult[n_eq:]
    return lam, mu


def optimality_residual(circuit, state):
    """How far ``state`` is from certifying an optimum of the circuit's LP.

    Below the critical voltage the node voltages do not move with the cost
    voltage and the multipliers read off the derivative are dual feasible.
    Returns the larger of the scaled voltage drift ``|dV/du|`` and the most
    negative inequality multiplier; forced nodes act as equality rows.
    """
    dv, dmult, n_eq, _ = _cost_derivative(circuit, state)
    lam = -dmult[n_eq:]
    cscale = max(1.0, float(np.max(np.abs(circuit.c), initial=0.0)))
    drift = float(np.max(np.abs(dv), initial=0.0)) * cscale
    neg = float(np.max(-lam, initial=0.0)) / cscale
    return max(drift, neg)


@dataclass
class EquivalenceReport:
    """Outcome of a circuit-versus-reference comparison for one LP."""

    status: str
    cost_gap: float = float("nan")
    max_violation: float = float("nan")
    kkt_residual: float = float("nan")
    u_crit: float = float("nan")
    u_cost: float = float("nan")
    active_set: list = field(default_factory=list)
    circuit_cost: float = float("nan")
    oracle_cost: float = float("nan")
    v: np.ndarray = None
    residuals: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self):
        return self.status == "optimal"

    def to_dict(self):
        return {"cost_gap": self.cost_gap, "max_violation": self.max_violation,
                "kkt_residual": self.kkt_residual, "u_crit": self.u_crit,
                "active_set": [int(i) for i in self.active_set]}


def verify_equivalence(lp, u_cost=None, tol=1e-6):
    """Solve ``lp`` with its circuit and compare against the reference solver.

    ``u_cost`` defaults to one volt below the critical voltage.  The
    report's ``cost_gap`` is relative, ``|c'x - c'x*| / max(1, |c'x*|)``;
    ``status`` is ``"optimal"`` when the gap is within ``tol``, else
    ``"mismatch"``, or ``"infeasible"``/``"unbounded"``/``"structural"``
    when the LP cannot be realised or solved.
    """
    ref = oracle.solve_lp(lp)
    if not ref.optimal:
        return EquivalenceReport(status=ref.status, message=f"reference solver: {ref.status}")
    try:
        clp = canonicalize(lp)
        circuit = compile(clp)
        u_crit = compute_ucrit(lp, check=False)
        u = u_crit - 1.0 if u_cost is None else float(u_cost)
        st = solve_steady_state(circuit, u)
    except StructuralError as exc:
        return EquivalenceReport(status="structural", message=str(exc))
    except (InfeasibleError, AssumptionError) as exc:
        return EquivalenceReport(status="infeasible", message=str(exc))
    x = clp.recover(st.v)
    cost = lp.cost(x)
    gap = abs(cost - ref.cost) / max(1.0, abs(ref.cost))
    lam_c, mu_c = reconstruct_duals(circuit, st)
    # canonical multipliers of the source rows are the source multipliers
    kkt = kkt_residual(lp, x, lam_c, mu_c[:lp.p]).max
    report = EquivalenceReport(
        status="optimal" if gap <= tol else "mismatch",
        cost_gap=float(gap), max_violation=float(lp.violation(x)), kkt_residual=float(kkt),
        u_crit=float(u_crit), u_cost=float(u),
        active_set=[int(k) for k in st.active_set],
        circuit_cost=float(cost), oracle_cost=float(ref.cost), v=x,
        residuals=steady_state_residuals(circuit, st))
    return report
