"""Command-line entry point: ``analoglp <command> ...``.

LPs are JSON objects with keys ``c``, ``a_eq``, ``b_eq``, ``a_ineq`` and
``b_ineq`` (see :meth:`LinearProgram.to_dict`).  Results go to ``--out``
or to stdout.  Exit status is 0 on success, 1 when a check fails or a
solver reports an error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .circuit import compile, export_netlist
from .errors import AnalogLPError
from .generate import RandomLpSpec, generate_random_lp
from .lp import LinearProgram, canonicalize
from .mpc import MpcSpec, closed_loop
from .steady import compute_ucrit, solve_steady_state, verify_equivalence
from .transient import TransientConfig, settling_time, simulate, write_csv

THREADS_ENV = "ANALOG_LP_THREADS"


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _circuit_and_ucost(lp, ucost):
    clp = canonicalize(lp)
    circuit = compile(clp)
    u_crit = compute_ucrit(lp)
    u = u_crit - 1.0 if ucost is None else ucost
    return clp, circuit, u_crit, u


def cmd_solve(args):
    lp = LinearProgram.load(args.problem)
    rep = verify_equivalence(lp, u_cost=args.ucost, tol=args.tol)
    if rep.status in ("infeasible", "unbounded", "structural"):
        raise AnalogLPError(f"{rep.status}: {rep.message}")
    out = {"v": [float(x) for x in rep.v], "cost": rep.circuit_cost, "u_crit": rep.u_crit,
           "u_cost": rep.u_cost, "oracle_cost": rep.oracle_cost, "cost_gap": rep.cost_gap,
           "status": rep.status}
    _emit(_json(out), args.out)
    return 0 if rep.ok else 1


def _verify_one(task):
    path, ucost, tol = task
    rep = verify_equivalence(LinearProgram.load(path), u_cost=ucost, tol=tol)
    d = rep.to_dict()
    d.update(problem=path, status=rep.status, message=rep.message)
    return d


def cmd_verify(args):
    tasks = [(p, args.ucost, args.tol) for p in args.problems]
    workers = 1
    if args.batch:
        workers = max(1, int(os.environ.get(THREADS_ENV, os.cpu_count() or 1)))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_verify_one, tasks))   # keeps input order
    else:
        results = [_verify_one(t) for t in tasks]
    _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in results), args.out)
    return 0 if all(r["status"] == "optimal" for r in results) else 1


def cmd_ucrit(args):
    u = compute_ucrit(LinearProgram.load(args.problem))
    _emit(repr(u) + "\n", args.out)
    return 0


def cmd_transient(args):
    lp = LinearProgram.load(args.problem)
    _, circuit, _, u = _circuit_and_ucost(lp, args.ucost)
    cfg = TransientConfig(branch_inductance=args.l, step=args.step, horizon=args.horizon,
                          integrator=args.integrator)
    traj = simulate(circuit, u, cfg)
    buf = io.StringIO()
    write_csv(traj, buf)
    _emit(buf.getvalue(), args.out)
    ref = solve_steady_state(circuit, u).cost
    settle = settling_time(traj, ref, cfg.settle_tolerance)
    print(f"steady cost {ref!r} final cost {traj.final_cost!r} settling time {settle!r}",
          file=sys.stderr)
    return 0


def cmd_netlist(args):
    lp = LinearProgram.load(args.problem)
    _, circuit, _, u = _circuit_and_ucost(lp, args.ucost)
    _emit(export_netlist(circuit, u, inductance=args.l), args.out)
    return 0


def cmd_mpc(args):
    spec = MpcSpec.load(args.scenario)
    duration = args.duration if args.duration is not None else spec.delta * len(spec.x_ref)
    res = closed_loop(spec, duration, solver=args.solver, perturbation_sigma=args.sigma,
                      seed=args.seed)
    buf = io.StringIO()
    res.write_csv(buf)
    _emit(buf.getvalue(), args.out)
    if res.error:
        print(res.error, file=sys.stderr)
        return 1
    return 0


def cmd_randlp(args):
    spec = RandomLpSpec(args.n_vars, args.n_eq, args.n_ineq, args.density, args.seed)
    _emit(generate_random_lp(spec).to_json(indent=1) + "\n", args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="analoglp",
                                 description="Solve LPs with a resistor/diode network model.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, ucost=True):
        p.add_argument("--out", help="output file (default: stdout)")
        if ucost:
            p.add_argument("--ucost", type=float, default=None,
                           help="cost voltage (default: critical voltage - 1)")

    p = sub.add_parser("solve", help="solve an LP and compare with the reference solver")
    p.add_argument("problem")
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="equivalence report for one or more LPs")
    p.add_argument("problems", nargs="+")
    p.add_argument("--batch", action="store_true",
                   help=f"run in parallel ({THREADS_ENV} caps the worker count)")
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ucrit", help="critical cost voltage")
    p.add_argument("problem")
    common(p, ucost=False)
    p.set_defaults(func=cmd_ucrit)

    p = sub.add_parser("transient", help="time-domain simulation, CSV trajectory")
    p.add_argument("problem")
    p.add_argument("--l", type=float, default=100e-9, help="branch inductance (H)")
    p.add_argument("--step", type=float, default=1e-9)
    p.add_argument("--horizon", type=float, default=20e-6)
    p.add_argument("--integrator", choices=("backward-euler", "trapezoidal"),
                   default="backward-euler")
    common(p)
    p.set_defaults(func=cmd_transient)

    p = sub.add_parser("netlist", help="SPICE deck of the compiled circuit")
    p.add_argument("problem")
    p.add_argument("--l", type=float, default=None, help="series inductance per resistor (H)")
    common(p)
    p.set_defaults(func=cmd_netlist)

    p = sub.add_parser("mpc", help="closed-loop MPC scenario, CSV t,x,u,cost")
    p.add_argument("scenario")
    p.add_argument("--duration", type=float, default=None,
                   help="seconds (default: length of the reference)")
    p.add_argument("--solver", choices=("circuit", "oracle"), default="circuit")
    p.add_argument("--sigma", type=float, default=0.0, help="relative resistor perturbation")
    p.add_argument("--seed", type=int, default=0)
    common(p, ucost=False)
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("randlp", help="seeded random LP as JSON")
    p.add_argument("n_vars", type=int)
    p.add_argument("n_eq", type=int)
    p.add_argument("n_ineq", type=int)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    common(p, ucost=False)
    p.set_defaults(func=cmd_randlp)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AnalogLPError, ValueError, OSError) as exc:
        print(f"analoglp {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
