"""Receding-horizon control of ``dx/dt = -x + u`` with the LP circuit as solver.

The finite-horizon problem tracks a reference in the 1-norm::

    min  sum_{i=1..N} t_i
    s.t. x_0 = x(t)
         x_{i+1} = x_i + (u_i - x_i) delta          i = 0..N-1
         -t_i <= x_i - x_ref(i) <= t_i              i = 1..N
         u_lo <= u_i <= u_hi                        i = 0..N-1

over ``(u_0..u_{N-1}, x_0..x_N, t_1..t_N)``.  In the circuit the ``x_0``
row is dropped and the ``x_0`` node is held by a voltage source instead,
so one compiled network serves every sampling instant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .circuit import compile
from .errors import AnalogLPError, ConvergenceError
from .lp import LinearProgram, canonicalize
from .steady import (RESIDUAL_TOL, compute_ucrit, optimality_residual,
                     solve_steady_state, steady_state_residuals)

__all__ = ["MpcSpec", "ClosedLoopResult", "build_mpc_lp", "mpc_layout",
           "closed_loop", "CircuitController", "solve_mpc_oracle"]

CIRCUIT = "circuit"
ORACLE = "oracle"
# cost voltage is set this far below the critical value
UCOST_MARGIN = 1.0
CERTIFY_TOL = 1e-7


@dataclass(frozen=True)
class MpcSpec:
    """Controller and scenario settings.

    ``x_ref`` holds reference samples on the sampling grid; the horizon
    at step ``k`` reads ``x_ref[k+1..k+N]`` and repeats the last sample
    past the end.
    """

    horizon_n: int
    delta: float
    x_ref: tuple
    u_bounds: tuple = (-1.5, 1.5)
    plant_initial: float = 0.0

    def __post_init__(self):
        if self.horizon_n < 1:
            raise ValueError("horizon_n must be at least 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        lo, hi = self.u_bounds
        if not lo < hi:
            raise ValueError("u_bounds must be ordered (lo < hi)")
        ref = tuple(float(x) for x in np.atleast_1d(np.asarray(self.x_ref, dtype=float)))
        if not ref:
            raise ValueError("x_ref needs at least one sample")
        object.__setattr__(self, "x_ref", ref)
        object.__setattr__(self, "u_bounds", (float(lo), float(hi)))

    def reference_window(self, k):
        """``x_ref(1..N)`` for the problem solved at sampling instant ``k``."""
        idx = np.minimum(np.arange(k + 1, k + self.horizon_n + 1), len(self.x_ref) - 1)
        return np.asarray(self.x_ref)[idx]

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["horizon_n"]), float(d["delta"]), tuple(d["x_ref"]),
                   tuple(d.get("u_bounds", (-1.5, 1.5))), float(d.get("plant_initial", 0.0)))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {"horizon_n": self.horizon_n, "delta": self.delta, "x_ref": list(self.x_ref),
                "u_bounds": list(self.u_bounds), "plant_initial": self.plant_initial}


def mpc_layout(n):
    """Column indices ``(u, x, t)`` of the horizon-``n`` LP."""
    u = np.arange(n)
    x = n + np.arange(n + 1)
    t = 2 * n + 1 + np.arange(n)
    return u, x, t


def build_mpc_lp(spec, x0, x_ref=None):
    """Finite-horizon LP at state ``x0``.

    ``x_ref`` overrides the reference window (length ``N``); by default
    the first window of ``spec`` is used.  Rows: equalities are the
    ``x_0`` row followed by the ``N`` dynamics rows; inequalities are the
    ``2N`` epigraph rows followed by the ``2N`` input bounds.
    """
    n, d = spec.horizon_n, spec.delta
    ref = spec.reference_window(0) if x_ref is None else np.asarray(x_ref, dtype=float)
    if ref.shape != (n,):
        raise ValueError(f"reference window must have length {n}")
    iu, ix, it = mpc_layout(n)
    nv = 3 * n + 1
    c = np.zeros(nv)
    c[it] = 1.0

    a_eq = np.zeros((n + 1, nv))
    b_eq = np.zeros(n + 1)
    a_eq[0, ix[0]] = 1.0
    b_eq[0] = x0
    for i in range(n):
        # x_{i+1} - (1 - d) x_i - d u_i = 0
        a_eq[1 + i, ix[i + 1]] = 1.0
        a_eq[1 + i, ix[i]] = -(1.0 - d)
        a_eq[1 + i, iu[i]] = -d

    a_in = np.zeros((4 * n, nv))
    b_in = np.zeros(4 * n)
    lo, hi = spec.u_bounds
    for i in range(n):
        # x_{i+1} - t_i <= ref_i  and  -x_{i+1} - t_i <= -ref_i
        a_in[2 * i, [ix[i + 1], it[i]]] = (1.0, -1.0)
        b_in[2 * i] = ref[i]
        a_in[2 * i + 1, [ix[i + 1], it[i]]] = (-1.0, -1.0)
        b_in[2 * i + 1] = -ref[i]
        a_in[2 * n + 2 * i, iu[i]] = 1.0
        b_in[2 * n + 2 * i] = hi
        a_in[2 * n + 2 * i + 1, iu[i]] = -1.0
        b_in[2 * n + 2 * i + 1] = -lo
    return LinearProgram(c, a_eq, b_eq, a_in, b_in)


def _without_x0_row(lp):
    return LinearProgram(lp.c, lp.a_eq[1:], lp.b_eq[1:], lp.a_ineq, lp.b_ineq)


def solve_mpc_oracle(spec, x0, x_ref):
    sol = oracle.solve_lp(build_mpc_lp(spec, x0, x_ref))
    if not sol.optimal:
        raise AnalogLPError(f"MPC LP is {sol.status}")
    return float(sol.v_star[0]), float(sol.cost), {"solver": ORACLE, "iterations": sol.iterations}


class CircuitController:
    """One compiled MPC circuit reused across sampling instants.

    The network realises the LP without its ``x_0`` row; the measured
    state is imposed on the ``x_0`` node.  Only the reference enters
    through the ``b`` sources.  The critical voltage is computed once (on
    the full LP, with the ``x_0`` row) and revalidated at every solve by
    the steady-state residuals and the optimality certificate; a failed
    check triggers a recomputation for the current data.

    ``sigma > 0`` scales every conductance by ``1 + eps``, ``eps`` Gaussian,
    drawn once per controller.
    """

    def __init__(self, spec, sigma=0.0, seed=0):
        self.spec = spec
        n = spec.horizon_n
        proto = build_mpc_lp(spec, spec.plant_initial)
        self.clp = canonicalize(_without_x0_row(proto))
        nominal = compile(self.clp)
        circuit = nominal
        if sigma > 0:
            circuit = nominal.perturbed(np.random.default_rng(seed), sigma)
        self.circuit = circuit
        self._b_nominal = np.array(nominal.b)
        # fixed source voltages b/s turn a nominal rhs into b * s'/s
        self._b_gain = circuit.row_sums / nominal.row_sums
        iu, ix, _ = mpc_layout(n)
        self._x0_plus = self.clp.pairing[ix[0]][0]
        self._u0_plus = self.clp.pairing[iu[0]][0]
        # rows of the circuit that carry the reference
        self._n_eq_inner = self.clp.inner.p
        self.u_crit = None
        self.recomputes = 0

    def _rhs(self, x_ref):
        b = self._b_nominal.copy()
        q_off = self._n_eq_inner
        n = self.spec.horizon_n
        for i in range(n):
            b[q_off + 2 * i] = x_ref[i]
            b[q_off + 2 * i + 1] = -x_ref[i]
        return b * self._b_gain

    def _lp_for_threshold(self, circuit, x0):
        # the perturbed network realises a slightly different LP; its
        # threshold is taken from that LP plus the x0 row
        inner = circuit.to_lp()
        row = np.zeros(inner.n)
        row[self._x0_plus] = 1.0
        return LinearProgram(inner.c, np.vstack([row, inner.a_eq]),
                             np.concatenate([[x0], inner.b_eq]), inner.a_ineq, inner.b_ineq)

    def solve(self, x0, x_ref):
        circuit = self.circuit.with_rhs(self._rhs(x_ref)).with_forced({self._x0_plus: x0})
        if self.u_crit is None:
            self.u_crit = compute_ucrit(self._lp_for_threshold(circuit, x0))
            self.recomputes += 1
        state = solve_steady_state(circuit, self.u_crit - UCOST_MARGIN)
        cert = optimality_residual(circuit, state)
        resid = max(steady_state_residuals(circuit, state).values())
        if cert > CERTIFY_TOL or resid > RESIDUAL_TOL:
            self.u_crit = compute_ucrit(self._lp_for_threshold(circuit, x0))
            self.recomputes += 1
            state = solve_steady_state(circuit, self.u_crit - UCOST_MARGIN)
            cert = optimality_residual(circuit, state)
            resid = max(steady_state_residuals(circuit, state).values())
            if cert > CERTIFY_TOL or resid > RESIDUAL_TOL:
                raise ConvergenceError("circuit operating point is not an LP optimum",
                                       residuals={"certificate": cert, "steady": resid})
        u0 = float(state.v[self._u0_plus])
        report = {"solver": CIRCUIT, "u_crit": self.u_crit, "certificate": cert,
                  "residual": resid, "active": len(state.active_set)}
        return u0, float(state.cost), report


@dataclass
class ClosedLoopResult:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    costs: np.ndarray
    reports: list = field(default_factory=list)
    error: str = ""

    @property
    def completed(self):
        return not self.error

    def write_csv(self, path_or_file):
        """Rows ``t,x,u,cost``; the final state row has empty input and cost."""
        def emit(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "u", "cost"])
            for k, t in enumerate(self.times):
                row = [repr(float(t)), repr(float(self.states[k]))]
                if k < len(self.inputs):
                    row += [repr(float(self.inputs[k])), repr(float(self.costs[k]))]
                else:
                    row += ["", ""]
                w.writerow(row)

        if hasattr(path_or_file, "write"):
            emit(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                emit(fh)


def closed_loop(spec, duration, solver=CIRCUIT, perturbation_sigma=0.0, seed=0):
    """Simulate the loop for ``duration`` seconds.

    At every sampling instant the LP is solved for the measured state,
    ``u_0`` is applied with a zero-order hold and the plant is advanced
    exactly, ``x <- u + (x - u) exp(-delta)``.  A solver failure stops
    the run and returns what was computed so far with ``error`` set.
    """
    if not duration >= spec.delta:
        raise ValueError("duration must cover at least one sampling period")
    if solver not in (CIRCUIT, ORACLE):
        raise ValueError(f"solver must be {CIRCUIT!r} or {ORACLE!r}")
    if perturbation_sigma and solver != CIRCUIT:
        raise ValueError("resistor perturbation applies to the circuit solver only")
    steps = int(np.floor(duration / spec.delta + 1e-9))
    ctrl = CircuitController(spec, perturbation_sigma, seed) if solver == CIRCUIT else None
    decay = np.exp(-spec.delta)
    x = spec.plant_initial
    states, inputs, costs, reports = [x], [], [], []
    error = ""
    for k in range(steps):
        ref = spec.reference_window(k)
        try:
            if ctrl is None:
                u, cost, rep = solve_mpc_oracle(spec, x, ref)
            else:
                u, cost, rep = ctrl.solve(x, ref)
        except AnalogLPError as exc:
            error = f"step {k}: {exc}"
            break
        inputs.append(u)
        costs.append(cost)
        reports.append(rep)
        x = u + (x - u) * decay
        states.append(x)
    times = spec.delta * np.arange(len(states))
    return ClosedLoopResult(times, np.array(states), np.array(inputs), np.array(costs),
                            reports, error)
