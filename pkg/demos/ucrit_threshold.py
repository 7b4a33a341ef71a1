"""Sweep the cost voltage across the critical value.

Below U_crit the network settles on the LP optimum and the cost no longer
changes with the voltage; above it the cost drifts away from the optimum.
"""

import numpy as np

from analoglp import RandomLpSpec, canonicalize, compile, compute_ucrit, generate_random_lp
from analoglp import solve_lp, solve_steady_state

lp = generate_random_lp(RandomLpSpec(10, 3, 16, seed=3))
clp = canonicalize(lp)
circuit = compile(clp)
u_crit = compute_ucrit(lp)
best = solve_lp(lp).cost
print(f"U_crit = {u_crit:.6f} V, optimum cost = {best:.6f}")
for offset in (-20, -5, -1, 0, 1, 5, 20):
    st = solve_steady_state(circuit, u_crit + offset)
    cost = lp.cost(clp.recover(st.v))
    print(f"u_cost = U_crit {offset:+4d}: cost {cost:12.6f}  gap {cost - best:+.2e}")
