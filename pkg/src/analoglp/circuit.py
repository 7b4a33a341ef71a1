"""Resistor/diode network that realises a non-negative LP.

Topology
--------
Variable nodes ``V1..Vn`` run vertically, constraint nodes ``U1..Um`` and
the cost node ``U0`` horizontally.  A resistor ``R_ij = 1/G_ij`` joins
``U_i`` and ``V_j`` whenever ``G_ij > 0``, where ``G = [c'; A_eq; A_ineq]``.
Each constraint node sinks a current ``I_i = b_i - s_i U_i`` through a
negative resistance ``-1/s_i`` in series with a source ``b_i/s_i``
(``s_i`` the row conductance).  On inequality rows an ideal diode sits
between the node and that branch, so ``I_i >= 0``.  ``U0`` is driven by
the external cost voltage.

Ports
-----
Port ``0`` is the cost node; port ``i >= 1`` is the outer terminal of the
negative resistance on constraint row ``i`` (the node named ``U<i>`` in
the netlist is the mesh side).  :func:`thevenin_resistance` works on the
resistor-only network with diodes and sources removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .lp import CanonicalLP, LinearProgram, build_primal_dual, canonicalize, split_columns

__all__ = [
    "Circuit",
    "PrimalDualCircuit",
    "PortResistanceReport",
    "compile",
    "compile_primal_dual",
    "thevenin_resistance",
    "cost_port_resistance",
    "port_resistances",
    "export_netlist",
]

COST, EQUALITY, INEQUALITY = "cost", "equality", "inequality"


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Circuit:
    """Compiled network.

    ``g`` is ``(m+1) x n`` with the cost row first.  ``b`` and
    ``neg_resistance`` are indexed by constraint row ``0..m-1``, which is
    port/node ``i+1``.  ``forced_nodes`` maps a variable index to a
    voltage imposed by an ideal source.
    """

    g: np.ndarray
    row_kind: tuple
    b: np.ndarray
    neg_resistance: np.ndarray
    forced_nodes: dict = field(default_factory=dict)
    source: CanonicalLP = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] < 2:
            raise StructuralError("conductance matrix needs a cost row and at least one constraint")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise StructuralError("conductances must be finite and non-negative")
        kinds = tuple(self.row_kind)
        if len(kinds) != g.shape[0] or kinds[0] != COST or any(
                k not in (EQUALITY, INEQUALITY) for k in kinds[1:]):
            raise StructuralError("row_kind must be 'cost' followed by equality/inequality tags")
        sums = g[1:].sum(axis=1)
        if np.any(sums <= 0):
            raise StructuralError(
                f"constraint rows {(np.flatnonzero(sums <= 0) + 1).tolist()} have no conductance")
        if np.any(g.sum(axis=0) <= 0):
            raise StructuralError("every variable node needs at least one resistor")
        object.__setattr__(self, "g", _ro(g))
        object.__setattr__(self, "row_kind", kinds)
        object.__setattr__(self, "b", _ro(np.asarray(self.b, dtype=float).reshape(-1)))
        object.__setattr__(self, "neg_resistance",
                           _ro(np.asarray(self.neg_resistance, dtype=float).reshape(-1)))
        if self.b.shape[0] != g.shape[0] - 1 or self.neg_resistance.shape[0] != g.shape[0] - 1:
            raise StructuralError("b and neg_resistance need one entry per constraint row")
        forced = {int(k): float(v) for k, v in dict(self.forced_nodes).items()}
        if any(k < 0 or k >= g.shape[1] for k in forced):
            raise StructuralError("forced node index out of range")
        object.__setattr__(self, "forced_nodes", forced)

    # -- shape helpers -----------------------------------------------------
    @property
    def n(self):
        return self.g.shape[1]

    @property
    def m(self):
        return self.g.shape[0] - 1

    @property
    def c(self):
        return self.g[0]

    @property
    def a(self):
        return self.g[1:]

    @property
    def row_sums(self):
        return self.a.sum(axis=1)

    @property
    def is_ineq(self):
        return np.array([k == INEQUALITY for k in self.row_kind[1:]], dtype=bool)

    @property
    def eq_rows(self):
        return np.flatnonzero(~self.is_ineq)

    @property
    def ineq_rows(self):
        return np.flatnonzero(self.is_ineq)

    def resistance(self, i, j):
        """``R_ij`` in ohms; ``inf`` where no resistor is present."""
        gij = self.g[i, j]
        return np.inf if gij == 0 else 1.0 / gij

    # -- derived circuits --------------------------------------------------
    def to_lp(self):
        """The non-negative LP this network realises (forced nodes ignored)."""
        a = self.a
        eq = self.eq_rows
        ineq = self.ineq_rows
        return LinearProgram(self.c, a[eq], self.b[eq], a[ineq], self.b[ineq])

    def with_forced(self, forced):
        return Circuit(self.g, self.row_kind, self.b, self.neg_resistance, dict(forced), self.source)

    def with_rhs(self, b):
        return Circuit(self.g, self.row_kind, b, self.neg_resistance, self.forced_nodes, self.source)

    def without_cost(self):
        g = np.array(self.g)
        g[0] = 0.0
        return Circuit(g, self.row_kind, self.b, self.neg_resistance, self.forced_nodes, self.source)

    def perturbed(self, rng, sigma):
        """Copy with every resistor scaled by ``1 + eps``, ``eps ~ N(0, sigma)``.

        The row sources keep their voltage ``b_i / s_i``, so the realised
        right-hand side becomes ``b_i s'_i / s_i``; the negative
        resistances are re-matched to the perturbed rows.
        """
        eps = rng.normal(0.0, sigma, size=self.g.shape)
        g = self.g * (1.0 + eps)
        sums = g[1:].sum(axis=1)
        b = self.b * sums / self.row_sums
        return Circuit(g, self.row_kind, b, -1.0 / sums, self.forced_nodes, self.source)

    def recover(self, v):
        """Source-LP variables from node voltages (identity without a source)."""
        if self.source is None:
            return np.asarray(v, dtype=float)
        return self.source.recover(v)


def _from_lp(lp, source=None):
    kinds = (COST,) + (EQUALITY,) * lp.p + (INEQUALITY,) * lp.q
    g = np.vstack([lp.c, lp.a_eq, lp.a_ineq])
    sums = g[1:].sum(axis=1)
    if np.any(sums <= 0):
        raise StructuralError(
            f"constraint rows {(np.flatnonzero(sums <= 0) + 1).tolist()} have zero conductance")
    return Circuit(g, kinds, lp.b, -1.0 / sums, {}, source)


def compile(clp):
    """Network of a canonical LP: cost row, equality rows, inequality rows."""
    if isinstance(clp, LinearProgram):
        raise TypeError("compile expects a CanonicalLP; call canonicalize() first")
    return _from_lp(clp.inner, clp)


@dataclass(frozen=True)
class PrimalDualCircuit:
    """Network of the primal-dual feasibility problem.

    ``gap_port`` is the constraint node of the zero-gap row, the single
    node shared by the primal and dual halves; its steady-state voltage is
    the critical cost voltage.  ``primal_index[k]`` is the variable node
    holding source variable ``k``.
    """

    circuit: Circuit
    gap_port: int
    primal_index: np.ndarray
    n_primal_rows: int
    n_dual_rows: int
    n_pairing_rows: int

    def __iter__(self):
        yield self.circuit
        yield self.gap_port


def compile_primal_dual(problem):
    """Cost-free network of the primal-dual feasibility problem.

    ``problem`` may be a :class:`LinearProgram` (canonicalised exactly as
    :func:`~analoglp.lp.canonicalize` would, so the primal half equals
    ``compile(canonicalize(problem))``), a :class:`CanonicalLP`, or a
    :class:`Circuit` (its own non-negative LP is used).
    """
    if isinstance(problem, Circuit):
        base, split = problem.to_lp(), False
    elif isinstance(problem, CanonicalLP):
        base, split = problem.inner, False
    else:
        canonicalize(problem)          # same structural checks as the primal circuit
        base, split = problem, True
    pd = build_primal_dual(base)
    if pd.degenerate_gap:
        raise StructuralError("zero cost and zero right-hand side: the gap row is empty")
    n, p, q, m = base.n, base.p, base.q, base.m
    if split:
        lp, _ = split_columns(pd.lp, range(n))
        n_pair = n + m
    else:
        lp = pd.lp
        n_pair = m
    # a column that is zero everywhere cannot be realised
    stacked = np.vstack([lp.a_eq, lp.a_ineq])
    if np.any(~(stacked > 0).any(axis=0)) or np.any(~(stacked > 0).any(axis=1)):
        raise StructuralError("primal-dual system has a zero row or column "
                              "(a variable or constraint of the LP is empty)")
    lp = LinearProgram(np.zeros(lp.n), lp.a_eq, lp.b_eq, lp.a_ineq, lp.b_ineq)
    circuit = _from_lp(lp)
    return PrimalDualCircuit(circuit, 1 + pd.gap_row, np.arange(n), p + q, n + q, n_pair)


# -- passivity analysis -----------------------------------------------------

def _mesh_laplacian(g):
    """Laplacian over nodes ``[V_1..V_n, alpha_0..alpha_m]`` of the positive resistors."""
    mp1, n = g.shape
    N = n + mp1
    Y = np.zeros((N, N))
    Y[:n, :n] = np.diag(g.sum(axis=0))
    Y[n:, n:] = np.diag(g.sum(axis=1))
    Y[:n, n:] = -g.T
    Y[n:, :n] = -g
    return Y


def _solve_grounded(Y, inject, ground):
    keep = np.setdiff1d(np.arange(Y.shape[0]), np.atleast_1d(ground))
    Yk = Y[np.ix_(keep, keep)]
    rhs = inject[keep]
    try:
        v = np.linalg.solve(Yk, rhs)
        ok = np.all(np.isfinite(v)) and np.linalg.cond(Yk) < 1e13
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        v, *_ = np.linalg.lstsq(Yk, rhs, rcond=1e-12)
        if np.max(np.abs(Yk @ v - rhs)) > 1e-8 * max(1.0, np.max(np.abs(rhs))):
            return None
    out = np.zeros(Y.shape[0])
    out[keep] = v
    return out


def thevenin_resistance(circuit, port_a, port_b):
    """Two-port resistance between ports ``port_a`` and ``port_b``.

    The network holds every positive resistor plus, for each constraint
    row, its negative resistance between the mesh node and the port
    terminal; diodes, sources and forced nodes are removed.  A unit test
    current is injected at ``port_a`` and drawn at ``port_b`` (the
    reference node).

    Raises
    ------
    StructuralError
        If the two ports are not connected through the mesh.
    """
    m, n = circuit.m, circuit.n
    for port in (port_a, port_b):
        if not 0 <= port <= m:
            raise ValueError(f"port {port} out of range 0..{m}")
    if port_a == port_b:
        return 0.0
    Ymesh = _mesh_laplacian(circuit.g)
    N = n + m + 1 + m
    Y = np.zeros((N, N))
    Y[:n + m + 1, :n + m + 1] = Ymesh
    for i in range(1, m + 1):
        gneg = 1.0 / circuit.neg_resistance[i - 1]      # = -s_i
        a_node = n + i
        t_node = n + m + i
        Y[a_node, a_node] += gneg
        Y[t_node, t_node] += gneg
        Y[a_node, t_node] -= gneg
        Y[t_node, a_node] -= gneg

    def terminal(port):
        return n if port == 0 else n + m + port

    ta, tb = terminal(port_a), terminal(port_b)
    inject = np.zeros(N)
    inject[ta] = 1.0
    inject[tb] = -1.0
    v = _solve_grounded(Y, inject, tb)
    if v is None:
        raise StructuralError(f"ports {port_a} and {port_b} are not connected")
    return float(v[ta] - v[tb])


def cost_port_resistance(circuit, active=None):
    """Resistance seen from the cost node to ground in an operating state.

    Equality rows and the inequality rows in ``active`` (conducting
    diodes) keep their negative resistance to ground; blocking rows are
    left floating; forced variable nodes are grounded.  Returns ``inf``
    when the cost node has no path to ground.
    """
    m, n = circuit.m, circuit.n
    Y = _mesh_laplacian(circuit.g)
    conducting = np.zeros(m, dtype=bool)
    conducting[circuit.eq_rows] = True
    if active is not None:
        conducting[np.asarray(circuit.ineq_rows)[np.isin(circuit.ineq_rows, active)]] = True
    for i in np.flatnonzero(conducting):
        Y[n + 1 + i, n + 1 + i] += 1.0 / circuit.neg_resistance[i]
    inject = np.zeros(n + m + 1)
    inject[n] = 1.0
    grounded = np.array(sorted(circuit.forced_nodes), dtype=int)
    # negative resistances reference ground; drop forced nodes to ground them
    keep = np.setdiff1d(np.arange(n + m + 1), grounded)
    Yk = Y[np.ix_(keep, keep)]
    rhs = inject[keep]
    try:
        sol = np.linalg.solve(Yk, rhs)
        if not np.all(np.isfinite(sol)) or np.linalg.cond(Yk) > 1e13:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(Yk, rhs, rcond=1e-12)
        if np.max(np.abs(Yk @ sol - rhs)) > 1e-8:
            return np.inf
    return float(sol[np.flatnonzero(keep == n)[0]])


@dataclass(frozen=True)
class PortResistanceReport:
    pairs: list
    cost_port_lower_bound: float

    @property
    def minimum(self):
        return min(r for _, _, r in self.pairs) if self.pairs else np.inf


def port_resistances(circuit, pairs):
    """Thevenin resistance for each ``(port_a, port_b)`` in ``pairs``."""
    out = [(int(a), int(b), thevenin_resistance(circuit, a, b)) for a, b in pairs]
    total = float(circuit.c.sum())
    bound = 1.0 / total if total > 0 else np.inf
    return PortResistanceReport(out, bound)


# -- SPICE export -----------------------------------------------------------

def _num(x):
    return format(float(x), ".12g")


def export_netlist(circuit, u_cost, inductance=None, r_on=1e-3, r_off=1e9,
                   tran_step=1e-8, tran_stop=1e-3, title=None):
    """SPICE deck for ``circuit`` driven at cost voltage ``u_cost``.

    Diodes are voltage-controlled switches (model ``DSW``).  When
    ``inductance`` is given every resistor gets that series inductance.
    The output depends only on the arguments.
    """
    n, m = circuit.n, circuit.m
    kinds = circuit.row_kind
    lines = [f"* {title or 'analog LP circuit'}: {n} variables, "
             f"{len(circuit.eq_rows)} equality rows, {len(circuit.ineq_rows)} inequality rows"]
    if len(circuit.ineq_rows):
        lines.append(f".model DSW SW(Ron={_num(r_on)} Roff={_num(r_off)} Vt=0 Vh=0)")
    lines.append(f"VCOST U0 0 DC {_num(u_cost)}")
    for i in range(m + 1):
        if i == 0:
            lines.append("* cost row")
        else:
            lines.append(f"* row {i} ({kinds[i]})")
        for j in np.flatnonzero(circuit.g[i] > 0):
            r = 1.0 / circuit.g[i, j]
            if inductance:
                lines.append(f"R{i}_{j + 1} U{i} X{i}_{j + 1} {_num(r)}")
                lines.append(f"L{i}_{j + 1} X{i}_{j + 1} V{j + 1} {_num(inductance)}")
            else:
                lines.append(f"R{i}_{j + 1} U{i} V{j + 1} {_num(r)}")
        if i == 0:
            continue
        neg = circuit.neg_resistance[i - 1]
        src = circuit.b[i - 1] / circuit.row_sums[i - 1]
        if kinds[i] == INEQUALITY:
            lines.append(f"S{i} U{i} P{i} U{i} P{i} DSW")
            lines.append(f"RN{i} P{i} B{i} {_num(neg)}")
        else:
            lines.append(f"RN{i} U{i} B{i} {_num(neg)}")
        lines.append(f"VB{i} B{i} 0 DC {_num(src)}")
    for j in sorted(circuit.forced_nodes):
        lines.append(f"VF{j + 1} V{j + 1} 0 DC {_num(circuit.forced_nodes[j])}")
    lines.append(".op")
    lines.append(f".tran {_num(tran_step)} {_num(tran_stop)}")
    lines.append(".end")
    return "\n".join(lines) + "\n"
