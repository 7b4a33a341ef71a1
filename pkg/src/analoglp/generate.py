"""Seeded random LPs with a certified finite optimum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .errors import AnalogLPError
from .lp import LinearProgram


@dataclass(frozen=True)
class RandomLpSpec:
    """Size and sparsity of a random LP.

    ``n_ineq`` counts every inequality row, including the ``n_vars``
    lower-bound rows ``-V_j <= -lo_j`` that keep the problem bounded, so
    it must exceed ``n_vars``.
    """

    n_vars: int
    n_eq: int
    n_ineq: int
    density: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_vars < 1 or self.n_eq < 0:
            raise ValueError("n_vars must be positive and n_eq non-negative")
        if self.n_eq >= self.n_vars:
            raise ValueError("need n_eq < n_vars")
        if self.n_ineq < self.n_vars + 1:
            raise ValueError("n_ineq must exceed n_vars (lower bounds plus at least one row)")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")


def _sparse_rows(rng, rows, cols, density):
    mat = rng.uniform(0.1, 1.0, size=(rows, cols)) * (rng.random((rows, cols)) < density)
    for r in np.flatnonzero(~(mat > 0).any(axis=1)):
        mat[r, rng.integers(cols)] = rng.uniform(0.1, 1.0)
    return mat


def generate_random_lp(spec, max_tries=50):
    """Random feasible, bounded LP described by ``spec``.

    Constraint matrices are non-negative and sparse.  An interior point
    ``V0`` fixes ``b_eq = A_eq V0`` and ``b_ineq = A_ineq V0 + slack`` with
    positive slack; lower bounds below ``V0`` together with the positive
    inequality rows bound the feasible set.  The cost is non-negative with
    at least one positive entry.  The reference solver must report an
    optimum before the LP is returned.

    Raises
    ------
    AnalogLPError
        No certified instance was found within ``max_tries`` resamples.
    """
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n_vars, spec.n_eq
    q_rand = spec.n_ineq - n
    for _ in range(max_tries):
        a_eq = _sparse_rows(rng, p, n, spec.density)
        if p and np.linalg.matrix_rank(a_eq) < p:
            continue
        a_in = _sparse_rows(rng, q_rand, n, spec.density)
        # every variable needs an upper bound from some positive row
        for j in np.flatnonzero(~(a_in > 0).any(axis=0)):
            a_in[rng.integers(q_rand), j] = rng.uniform(0.1, 1.0)
        v0 = rng.uniform(0.5, 2.0, size=n)
        lo = v0 - rng.uniform(0.5, 1.5, size=n)
        b_eq = a_eq @ v0
        b_in = a_in @ v0 + rng.uniform(0.5, 2.0, size=q_rand)
        a_ineq = np.vstack([a_in, -np.eye(n)])
        b_ineq = np.concatenate([b_in, -lo])
        c = _sparse_rows(rng, 1, n, spec.density)[0]
        lp = LinearProgram(np.round(c, 6), np.round(a_eq, 6), np.round(b_eq, 6),
                           np.round(a_ineq, 6), np.round(b_ineq, 6))
        if oracle.solve_lp(lp).optimal:
            return lp
    raise AnalogLPError(f"no certified LP after {max_tries} samples (seed {spec.seed})")
