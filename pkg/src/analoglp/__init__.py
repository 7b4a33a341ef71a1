"""Linear programs solved as the DC operating point of a resistor/diode network."""

from .circuit import (Circuit, PrimalDualCircuit, compile, compile_primal_dual,
                      cost_port_resistance, export_netlist, port_resistances,
                      thevenin_resistance)
from .errors import (AnalogLPError, AssumptionError, ConvergenceError, InfeasibleError,
                     SimulationError, StructuralError)
from .generate import RandomLpSpec, generate_random_lp
from .lp import (CanonicalLP, LinearProgram, build_dual, build_primal_dual, canonicalize,
                 kkt_residual)
from .mpc import ClosedLoopResult, MpcSpec, build_mpc_lp, closed_loop
from .oracle import solve_lp
from .steady import (SteadyState, compute_ucrit, cost_sensitivity, optimality_residual,
                     reconstruct_duals, solve_nocost_qp, solve_steady_state,
                     steady_state_residuals, verify_equivalence)
from .transient import TransientConfig, Trajectory, settling_time, simulate

__version__ = "0.1.0"
