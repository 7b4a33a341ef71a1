"""Linear programs in the form ``min c'V  s.t.  A_eq V = b_eq,  A_ineq V <= b_ineq``.

The variables ``V`` are free.  Besides the plain container this module
provides

* :func:`canonicalize` - rewrite an LP so that every coefficient is
  non-negative (the form a resistor network can realize),
* :func:`build_dual` / :func:`build_primal_dual` - the dual LP and the
  combined primal-dual feasibility problem whose feasible points are
  exactly the optimal primal/dual pairs,
* :func:`kkt_residual` - optimality residuals of a candidate triple.

Multiplier conventions
----------------------
Two sign conventions appear and are kept apart on purpose.

*Lagrange multipliers* ``(lam, mu)`` satisfy::

    c + A_eq' mu + A_ineq' lam = 0,   lam >= 0

*Dual variables* ``y = (y_eq, y_ineq)`` of :class:`DualLP` satisfy::

    max b'y  s.t.  A_eq' y_eq + A_ineq' y_ineq = c,   y_ineq <= 0

so that ``y = -(mu, lam)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError

__all__ = [
    "LinearProgram",
    "CanonicalLP",
    "DualLP",
    "PrimalDualSystem",
    "KktResidual",
    "canonicalize",
    "split_columns",
    "build_dual",
    "build_primal_dual",
    "kkt_residual",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_matrix(a, n, name):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((0, n))
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"{name} must have {n} columns, got shape {a.shape}")
    return a


def _as_vector(b, m, name):
    if b is None:
        b = np.zeros(0)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != m:
        raise ValueError(f"{name} must have length {m}, got {b.shape[0]}")
    return b


@dataclass(frozen=True)
class LinearProgram:
    """An LP ``min c'V s.t. a_eq V = b_eq, a_ineq V <= b_ineq`` with free ``V``.

    Empty constraint blocks may be passed as ``None`` or empty lists.
    Arrays are copied and made read-only.
    """

    c: np.ndarray
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None
    a_ineq: np.ndarray = None
    b_ineq: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.shape[0]
        if n == 0:
            raise ValueError("an LP needs at least one variable")
        a_eq = _as_matrix(self.a_eq, n, "a_eq")
        a_ineq = _as_matrix(self.a_ineq, n, "a_ineq")
        b_eq = _as_vector(self.b_eq, a_eq.shape[0], "b_eq")
        b_ineq = _as_vector(self.b_ineq, a_ineq.shape[0], "b_ineq")
        if a_eq.shape[0] + a_ineq.shape[0] < 1:
            raise ValueError("an LP needs at least one constraint")
        for name, arr in (("c", c), ("a_eq", a_eq), ("b_eq", b_eq),
                          ("a_ineq", a_ineq), ("b_ineq", b_ineq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, _frozen(arr))

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def p(self):
        return self.a_eq.shape[0]

    @property
    def q(self):
        return self.a_ineq.shape[0]

    @property
    def m(self):
        return self.p + self.q

    @property
    def a(self):
        """All constraint rows, equalities first."""
        return np.vstack([self.a_eq, self.a_ineq])

    @property
    def b(self):
        return np.concatenate([self.b_eq, self.b_ineq])

    def cost(self, v):
        return float(self.c @ np.asarray(v, dtype=float))

    def violation(self, v):
        """Largest constraint violation of ``v`` (max-norm)."""
        v = np.asarray(v, dtype=float)
        viol = 0.0
        if self.p:
            viol = max(viol, float(np.max(np.abs(self.a_eq @ v - self.b_eq))))
        if self.q:
            viol = max(viol, float(np.max(self.a_ineq @ v - self.b_ineq, initial=0.0)))
        return viol

    def is_nonnegative(self):
        return bool(np.all(self.c >= 0) and np.all(self.a_eq >= 0)
                    and np.all(self.a_ineq >= 0))

    def with_rhs(self, b_eq=None, b_ineq=None):
        return LinearProgram(self.c, self.a_eq,
                             self.b_eq if b_eq is None else b_eq,
                             self.a_ineq,
                             self.b_ineq if b_ineq is None else b_ineq)

    def with_cost(self, c):
        return LinearProgram(c, self.a_eq, self.b_eq, self.a_ineq, self.b_ineq)

    # -- JSON --------------------------------------------------------------
    def to_dict(self):
        return {
            "c": self.c.tolist(),
            "a_eq": self.a_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
            "a_ineq": self.a_ineq.tolist(),
            "b_ineq": self.b_ineq.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["c"], d.get("a_eq") or None, d.get("b_eq") or None,
                   d.get("a_ineq") or None, d.get("b_ineq") or None)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


@dataclass(frozen=True)
class CanonicalLP:
    """An LP with non-negative data plus the map back to the source LP.

    ``pairing[k] = (plus, minus)`` gives the two columns standing for
    source variable ``k``; the source value is the ``plus`` column.
    Source variables that were not split have ``minus = -1``.
    """

    inner: LinearProgram
    pairing: tuple
    origin_dim: int

    def __post_init__(self):
        lp = self.inner
        if not lp.is_nonnegative():
            raise StructuralError("canonical LP has negative coefficients")
        a = lp.a
        if np.any(~(a > 0).any(axis=1)):
            rows = np.flatnonzero(~(a > 0).any(axis=1)).tolist()
            raise StructuralError(f"constraint rows {rows} have no positive entry")
        stacked = np.vstack([lp.c, a])
        if np.any(~(stacked > 0).any(axis=0)):
            cols = np.flatnonzero(~(stacked > 0).any(axis=0)).tolist()
            raise StructuralError(f"columns {cols} have no positive entry")
        object.__setattr__(self, "pairing", tuple(tuple(int(i) for i in pr)
                                                  for pr in self.pairing))

    @property
    def plus_index(self):
        return np.array([pr[0] for pr in self.pairing], dtype=int)

    def recover(self, x):
        """Source-LP variables from canonical ones."""
        x = np.asarray(x, dtype=float)
        return x[self.plus_index]

    def lift(self, v):
        """Canonical point corresponding to source point ``v``."""
        v = np.asarray(v, dtype=float)
        x = np.zeros(self.inner.n)
        for k, (plus, minus) in enumerate(self.pairing):
            x[plus] = v[k]
            if minus >= 0:
                x[minus] = -v[k]
        return x


def split_columns(lp, columns):
    """Split the given columns of ``lp`` into positive/negative halves.

    Column ``j`` becomes the pair ``(V+_j, V-_j)`` with ``V-_j = -V_j``;
    every row ``a`` is rewritten as ``a+ V+ + a- V-`` where
    ``a = a+ - a-``, and the pairing row ``V+_j + V-_j = 0`` is appended to
    the equality block.  Minus columns are appended after the existing
    columns in the order given.  Columns not listed keep their
    coefficients untouched.

    Returns ``(LinearProgram, pairing)``.
    """
    columns = [int(j) for j in columns]
    n = lp.n
    k = len(columns)

    def split(mat):
        plus = mat.copy()
        minus = np.zeros((mat.shape[0], k))
        for t, j in enumerate(columns):
            col = mat[:, j]
            plus[:, j] = np.maximum(col, 0.0)
            minus[:, t] = np.maximum(-col, 0.0)
        return np.hstack([plus, minus])

    c = split(lp.c.reshape(1, -1)).reshape(-1)
    a_eq = split(lp.a_eq)
    a_ineq = split(lp.a_ineq)
    pair_rows = np.zeros((k, n + k))
    for t, j in enumerate(columns):
        pair_rows[t, j] = 1.0
        pair_rows[t, n + t] = 1.0
    a_eq = np.vstack([a_eq, pair_rows])
    b_eq = np.concatenate([lp.b_eq, np.zeros(k)])
    minus_of = {j: n + t for t, j in enumerate(columns)}
    pairing = tuple((j, minus_of.get(j, -1)) for j in range(n))
    return LinearProgram(c, a_eq, b_eq, a_ineq, lp.b_ineq), pairing


def canonicalize(lp):
    """Rewrite ``lp`` with non-negative coefficients.

    Every variable ``V_j`` is split into ``V+_j = V_j`` and ``V-_j = -V_j``,
    joined by an explicit equality row ``V+_j + V-_j = 0``.  The result
    has ``2 n`` variables ordered ``[V+, V-]`` and ``p + n`` equality rows
    (source rows first, then pairing rows).

    Raises
    ------
    StructuralError
        If a variable appears nowhere (zero cost and zero column) or a
        constraint row is identically zero.
    """
    stacked = np.vstack([lp.c, lp.a])
    dead = np.flatnonzero(~(stacked != 0).any(axis=0))
    if dead.size:
        raise StructuralError(f"variables {dead.tolist()} appear in no row and not in the cost")
    zero_rows = np.flatnonzero(~(lp.a != 0).any(axis=1))
    if zero_rows.size:
        raise StructuralError(f"constraint rows {zero_rows.tolist()} are identically zero")
    inner, pairing = split_columns(lp, range(lp.n))
    return CanonicalLP(inner, pairing, lp.n)


@dataclass(frozen=True)
class DualLP:
    """``max b'y  s.t.  a y = rhs``, with ``y_k <= 0`` wherever ``sign[k] < 0``.

    ``a`` is ``[A_eq' A_ineq']`` and ``rhs`` the primal cost; ``sign`` is 0
    for equality multipliers (free) and -1 for inequality multipliers.
    """

    b: np.ndarray
    a: np.ndarray
    rhs: np.ndarray
    sign: np.ndarray

    @property
    def size(self):
        return self.b.shape[0]

    def as_min_lp(self):
        """The dual as a :class:`LinearProgram` (``min -b'y``)."""
        restricted = np.flatnonzero(self.sign < 0)
        a_ineq = np.zeros((restricted.size, self.size))
        a_ineq[np.arange(restricted.size), restricted] = 1.0
        return LinearProgram(-self.b, self.a, self.rhs, a_ineq, np.zeros(restricted.size))

    def objective(self, y):
        return float(self.b @ y)


def build_dual(lp):
    """Dual of ``lp`` as a maximization over ``y = (y_eq, y_ineq)``."""
    sign = np.concatenate([np.zeros(lp.p), -np.ones(lp.q)])
    return DualLP(_frozen(lp.b), _frozen(lp.a.T), _frozen(lp.c), _frozen(sign))


@dataclass(frozen=True)
class PrimalDualSystem:
    """Feasibility LP over ``z = (V, y, y_minus)`` joining primal and dual.

    Rows, in order::

        a_eq:   A_eq V                      = b_eq     (p rows, primal)
                A+' y + A-' y_minus         = c        (n rows, dual)
                c'V + b_-'y + b_+'y_minus   = 0        (1 row, zero gap)
                y + y_minus                 = 0        (m rows)
        a_ineq: A_ineq V                    <= b_ineq  (q rows, primal)
                y_ineq                      <= 0       (q rows, dual sign)

    with ``A = [A_eq; A_ineq] = A+ - A-`` and ``b = b_+ - b_-``.  Because
    ``y_minus = -y`` the gap row reads ``c'V = b'y``.  Only the ``V`` block
    carries negative coefficients; splitting those columns yields a
    non-negative system.
    """

    lp: LinearProgram
    source: LinearProgram
    b_plus: np.ndarray
    b_minus: np.ndarray
    degenerate_gap: bool

    @property
    def n(self):
        return self.source.n

    @property
    def m(self):
        return self.source.m

    @property
    def gap_row(self):
        """Index of the zero-gap row within ``lp.a_eq``."""
        return self.source.p + self.source.n

    def primal(self, z):
        return np.asarray(z)[: self.n]

    def dual(self, z):
        z = np.asarray(z)
        return z[self.n: self.n + self.m]

    def multipliers(self, z):
        """Lagrange multipliers ``(lam, mu)`` of the source LP from ``z``."""
        y = self.dual(z)
        p = self.source.p
        return -y[p:], -y[:p]


def build_primal_dual(lp):
    """Combined primal-dual feasibility problem of ``lp``.

    Any feasible ``z`` has a primal-optimal ``V`` block and a dual-optimal
    ``y`` block.  ``degenerate_gap`` is set when ``c = 0`` and ``b = 0``,
    in which case the gap row is identically zero (still valid, but it
    carries no information).
    """
    n, p, q, m = lp.n, lp.p, lp.q, lp.m
    a = lp.a
    b = lp.b
    a_plus = np.maximum(a, 0.0)
    a_minus = np.maximum(-a, 0.0)
    b_plus = np.maximum(b, 0.0)
    b_minus = np.maximum(-b, 0.0)

    width = n + 2 * m
    rows_eq = []
    rhs_eq = []
    # primal equalities
    blk = np.zeros((p, width))
    blk[:, :n] = lp.a_eq
    rows_eq.append(blk)
    rhs_eq.append(lp.b_eq)
    # dual equalities
    blk = np.zeros((n, width))
    blk[:, n:n + m] = a_plus.T
    blk[:, n + m:] = a_minus.T
    rows_eq.append(blk)
    rhs_eq.append(lp.c)
    # zero duality gap
    blk = np.zeros((1, width))
    blk[0, :n] = lp.c
    blk[0, n:n + m] = b_minus
    blk[0, n + m:] = b_plus
    rows_eq.append(blk)
    rhs_eq.append(np.zeros(1))
    # y + y_minus = 0
    blk = np.zeros((m, width))
    blk[np.arange(m), n + np.arange(m)] = 1.0
    blk[np.arange(m), n + m + np.arange(m)] = 1.0
    rows_eq.append(blk)
    rhs_eq.append(np.zeros(m))

    ineq = np.zeros((2 * q, width))
    ineq[:q, :n] = lp.a_ineq
    ineq[q + np.arange(q), n + p + np.arange(q)] = 1.0
    rhs_ineq = np.concatenate([lp.b_ineq, np.zeros(q)])

    combined = LinearProgram(np.zeros(width), np.vstack(rows_eq), np.concatenate(rhs_eq),
                             ineq, rhs_ineq)
    degenerate = not (np.any(lp.c != 0) or np.any(b != 0))
    return PrimalDualSystem(combined, lp, _frozen(b_plus), _frozen(b_minus), degenerate)


@dataclass(frozen=True)
class KktResidual:
    """Max-norm KKT residuals; blocks absent from the LP report 0."""

    stationarity: float
    primal: float
    dual: float
    complementarity: float

    @property
    def max(self):
        return max(self.stationarity, self.primal, self.dual, self.complementarity)

    def as_dict(self):
        return {"stationarity": self.stationarity, "primal": self.primal,
                "dual": self.dual, "complementarity": self.complementarity}


def kkt_residual(lp, v, lam, mu):
    """KKT residuals of ``(v, lam, mu)`` for ``lp`` (Lagrange convention)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if v.shape[0] != lp.n or lam.shape[0] != lp.q or mu.shape[0] != lp.p:
        raise ValueError("dimension mismatch between lp and (v, lam, mu)")
    grad = lp.c + lp.a_eq.T @ mu + lp.a_ineq.T @ lam
    stat = float(np.max(np.abs(grad)))
    primal = lp.violation(v)
    dual = float(np.max(-lam, initial=0.0))
    if lp.q:
        slack = lp.a_ineq @ v - lp.b_ineq
        comp = float(np.max(np.abs(lam * slack)))
    else:
        comp = 0.0
    return KktResidual(stat, primal, max(dual, 0.0), comp)
