"""Solve the four-inequality hardware LP in all four cost directions.

Shows the compiled network, the critical cost voltage and the settled
node voltages next to the reference solver's answer.
"""

import numpy as np

from analoglp import canonicalize, compile, compute_ucrit, solve_lp, solve_steady_state
from analoglp import LinearProgram

A = np.array([[5 / 12, -1.0], [5 / 2, 1.0], [-1.0, 0.0], [0.0, 1.0]])
B = np.array([35 / 12, 35 / 2, 5.0, 5.0])

for direction in ((1, 1), (1, 0), (-1, 1), (-1, -1)):
    lp = LinearProgram(-np.asarray(direction, float), None, None, A, B)
    clp = canonicalize(lp)
    circuit = compile(clp)
    u_crit = compute_ucrit(lp)
    st = solve_steady_state(circuit, u_crit - 1.0)
    x = clp.recover(st.v)
    ref = solve_lp(lp).v_star
    print(f"maximise {direction}: U_crit = {u_crit:.6f} V, circuit x = {np.round(x, 9)}, "
          f"reference x = {np.round(ref, 9)}, conducting rows {[int(i) for i in st.active_set]}")
