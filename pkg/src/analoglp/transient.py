"""Time-domain simulation of the LP circuit with wire inductance.

Every positive resistor ``R_ij`` carries a series inductance ``L``; the
branch current is the state.  Each step replaces a branch by its
implicit companion model (a conductance plus a history current source)
and solves one nodal system for the variable nodes ``V`` and the
constraint nodes ``U_1..U_m``; the cost node is held at ``u_cost``.

A constraint row sinks ``I = (b - s U) / (1 - s r_d)`` where ``r_d`` is
zero on equality rows and the switch resistance (``r_on`` or ``r_off``)
on inequality rows.  A diode conducts on the next step when its current
is positive, which is also the sign of its voltage ``r_d I``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import SimulationError

__all__ = ["TransientConfig", "Trajectory", "simulate", "settling_time",
           "last_switch_time", "write_csv"]

INTEGRATORS = ("backward-euler", "trapezoidal")


@dataclass(frozen=True)
class TransientConfig:
    """Integration settings.

    The default switch resistances are far from the hardware values
    (1 mOhm / 1 GOhm) on purpose: the conducting branch current is
    scaled by ``1 / (1 - s r_on)``, so ``r_on`` must be tiny for the
    settled state to match the ideal-diode steady state.
    """

    branch_inductance: float = 100e-9
    diode_r_on: float = 1e-9
    diode_r_off: float = 1e12
    step: float = 1e-9
    horizon: float = 20e-6
    integrator: str = "backward-euler"
    settle_tolerance: float = 0.005

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.horizon >= self.step:
            raise ValueError("horizon must be at least one step")
        if not self.diode_r_off > self.diode_r_on > 0:
            raise ValueError("need r_off > r_on > 0")
        if self.branch_inductance < 0:
            raise ValueError("inductance must be non-negative")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")


@dataclass
class Trajectory:
    times: np.ndarray
    v_nodes: np.ndarray            # (steps, n)
    cost_values: np.ndarray
    diode_states: np.ndarray       # (steps, q) booleans
    u_nodes: np.ndarray = None     # (steps, m)

    @property
    def final_v(self):
        return self.v_nodes[-1]

    @property
    def final_cost(self):
        return float(self.cost_values[-1])


def simulate(circuit, u_cost, cfg=TransientConfig()):
    """Integrate the network from rest (zero currents, blocking diodes).

    Raises
    ------
    SimulationError
        A step matrix is singular or the state becomes non-finite.
    """
    g = circuit.g
    m1, n = g.shape
    m = m1 - 1
    s = circuit.row_sums
    ineq = circuit.ineq_rows
    if np.any(s[ineq] * cfg.diode_r_on >= 1.0):
        raise ValueError("diode_r_on too large: need s_i * r_on < 1 on every inequality row")
    h, L = cfg.step, cfg.branch_inductance
    present = g > 0
    R = np.where(present, 1.0 / np.where(present, g, 1.0), 0.0)
    trap = cfg.integrator == "trapezoidal"
    k_l = (2.0 if trap else 1.0) * L / h
    geff = np.where(present, 1.0 / (R + k_l), 0.0)

    forced = np.array(sorted(circuit.forced_nodes), dtype=int)
    free = np.setdiff1d(np.arange(n), forced)
    v_forced = np.array([circuit.forced_nodes[j] for j in forced], dtype=float)
    nf = free.size
    N = nf + m

    # state-independent part of the nodal matrix
    base = np.zeros((N, N))
    col = geff.sum(axis=0)
    base[np.arange(nf), np.arange(nf)] = col[free]
    base[:nf, nf:] = -geff[1:, free].T
    base[nf:, :nf] = -geff[1:, free]
    base[nf + np.arange(m), nf + np.arange(m)] = geff[1:].sum(axis=1)

    def row_gain(state):
        k = np.ones(m)
        rd = np.where(state, cfg.diode_r_on, cfg.diode_r_off)
        k[ineq] = 1.0 / (1.0 - s[ineq] * rd)
        return k

    cache = {}

    def factor(state):
        key = state.tobytes()
        if key not in cache:
            k = row_gain(state)
            Y = base.copy()
            Y[nf + np.arange(m), nf + np.arange(m)] -= k * s
            try:
                lu = lu_factor(Y, check_finite=False)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise SimulationError(f"singular step matrix: {exc}", time=None) from exc
            if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.max(np.abs(np.diag(lu[0]))):
                raise SimulationError("singular step matrix")
            cache[key] = (lu, k)
        return cache[key]

    steps = int(round(cfg.horizon / h))
    q = ineq.size
    state = np.zeros(q, dtype=bool)
    i_br = np.zeros_like(g)
    v_br = np.zeros_like(g)
    v = np.zeros(n)
    v[forced] = v_forced
    u = np.zeros(m)

    times = np.empty(steps + 1)
    vs = np.empty((steps + 1, n))
    us = np.empty((steps + 1, m))
    costs = np.empty(steps + 1)
    ds = np.empty((steps + 1, q), dtype=bool)
    times[0], vs[0], us[0], costs[0], ds[0] = 0.0, v, u, float(circuit.c @ v), state

    b = circuit.b
    for step in range(1, steps + 1):
        t = step * h
        if trap:
            hist = geff * (v_br + (k_l - R) * i_br)
        else:
            hist = geff * k_l * i_br
        hist = np.where(present, hist, 0.0)
        (lu, k) = factor(state)
        rhs = np.empty(N)
        # KCL at free variable nodes: currents arriving from every row
        rhs[:nf] = geff[0, free] * u_cost + hist[:, free].sum(axis=0)
        # KCL at constraint nodes (currents leaving)
        rhs[nf:] = -hist[1:].sum(axis=1) - k * b
        if forced.size:
            rhs[nf:] += geff[1:, forced] @ v_forced
        x = lu_solve(lu, rhs, check_finite=False)
        if not np.all(np.isfinite(x)):
            raise SimulationError("non-finite state", time=t)
        v[free] = x[:nf]
        u = x[nf:]
        uall = np.concatenate([[u_cost], u])
        v_br = np.where(present, uall[:, None] - v[None, :], 0.0)
        i_br = np.where(present, geff * v_br + hist, 0.0)
        if ineq.size:
            cur = k[ineq] * (b[ineq] - s[ineq] * u[ineq])
            state = cur > 0
        times[step], vs[step], us[step] = t, v, u
        costs[step], ds[step] = float(circuit.c @ v), state
    return Trajectory(times, vs, costs, ds, us)


def settling_time(traj, reference_cost, rel_tol=0.005):
    """First time after which the cost stays within ``rel_tol`` of the reference.

    The band is ``rel_tol * max(1, |reference|)``.  Returns ``None`` if the
    last sample is outside the band.
    """
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    band = rel_tol * max(1.0, abs(reference_cost))
    outside = np.flatnonzero(np.abs(traj.cost_values - reference_cost) > band)
    if outside.size == 0:
        return float(traj.times[0])
    last = outside[-1]
    if last == len(traj.times) - 1:
        return None
    return float(traj.times[last + 1])


def last_switch_time(traj):
    """Time of the last change in any diode state (``0`` if none switch)."""
    d = traj.diode_states
    if d.shape[1] == 0 or len(d) < 2:
        return 0.0
    changed = np.flatnonzero(np.any(d[1:] != d[:-1], axis=1))
    return float(traj.times[changed[-1] + 1]) if changed.size else 0.0


def write_csv(traj, path_or_file):
    """CSV with header ``t,V1..Vn,cost,d1..dq``, one row per step."""
    n = traj.v_nodes.shape[1]
    q = traj.diode_states.shape[1]
    header = ["t"] + [f"V{j + 1}" for j in range(n)] + ["cost"] + [f"d{k + 1}" for k in range(q)]

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, v, c, d in zip(traj.times, traj.v_nodes, traj.cost_values, traj.diode_states):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in v] + [repr(float(c))]
                       + [int(x) for x in d])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
