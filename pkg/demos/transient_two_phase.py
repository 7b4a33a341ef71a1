"""Time-domain run of a 20-variable LP circuit with 100 nH wires.

Prints the relative cost error and the number of conducting diodes at a
few instants, then the settling time and the last diode switch.  Writes
the full trajectory to transient.csv.
"""

import numpy as np

from analoglp import RandomLpSpec, TransientConfig, canonicalize, compile, compute_ucrit
from analoglp import generate_random_lp, settling_time, simulate, solve_steady_state
from analoglp.transient import last_switch_time, write_csv

lp = generate_random_lp(RandomLpSpec(20, 5, 30, 0.3, seed=2024))
circuit = compile(canonicalize(lp))
u = compute_ucrit(lp) - 1.0
ref = solve_steady_state(circuit, u).cost
traj = simulate(circuit, u, TransientConfig(step=2e-9, horizon=500e-6))
err = np.abs(traj.cost_values - ref) / max(1.0, abs(ref))
for t in (1e-6, 10e-6, 50e-6, 100e-6, 200e-6, 300e-6, 500e-6):
    k = min(int(round(t / 2e-9)), len(traj.times) - 1)
    print(f"t = {t * 1e6:5.0f} us: cost error {err[k]:.2e}, "
          f"conducting diodes {int(traj.diode_states[k].sum())}")
print(f"settling time {settling_time(traj, ref)!r} s, last switch {last_switch_time(traj)!r} s")
write_csv(traj, "transient.csv")
