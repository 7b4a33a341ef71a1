"""Track a sine reference with the circuit as the MPC solver.

Runs the nominal circuit loop, the reference-solver loop and a loop with
1% Gaussian resistor spread, and prints how far apart they end up.
"""

import numpy as np

from analoglp import MpcSpec, closed_loop

ref = tuple(np.sin(2 * np.pi * np.arange(80) * 0.1 / 4.0))
spec = MpcSpec(4, 0.1, ref, (-1.5, 1.5), 0.0)
oracle = closed_loop(spec, 6.0, solver="oracle")
nominal = closed_loop(spec, 6.0, solver="circuit")
perturbed = closed_loop(spec, 6.0, solver="circuit", perturbation_sigma=0.01, seed=7)
print(f"circuit vs reference solver, max input difference {np.max(np.abs(oracle.inputs - nominal.inputs)):.1e}")
print(f"perturbed vs nominal, max state difference {np.max(np.abs(perturbed.states - nominal.states)):.2e}")
print(f"largest input magnitude: nominal {np.max(np.abs(nominal.inputs)):.6f}, "
      f"perturbed {np.max(np.abs(perturbed.inputs)):.6f}")
nominal.write_csv("mpc_nominal.csv")
