"""Command line: ``solve``, ``sweep`` and ``certify``.

Exit codes: 0 when a solve succeeds (or a certification passes), 2 when the
instance is infeasible, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import config as cfgmod
from .baseline import solve_equal_allocation
from .errors import InfeasibleInstance, MecRelayError
from .montecarlo import random_feasible_instance, run_sweep
from .oracle import GRID_MAX_NODES, grid_solve, multistart_solve
from .recovery import infeasible_dict, solve_instance

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
CERTIFY_TOL = {1: 1e-2, 2: 2e-2}


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    if args.config is None:
        return cfgmod.parse_config({})
    return cfgmod.load_config(args.config)


def cmd_solve(args):
    cfg = _load(args)
    seed = 0 if args.seed is None else args.seed
    inst = cfgmod.instance_from_config(cfg, seed=seed)
    settings = cfgmod.settings_from_config(cfg, args.tolerance, args.max_iter)
    solver = solve_equal_allocation if args.method == "equal" else solve_instance
    try:
        report = solver(inst, settings)
    except InfeasibleInstance as exc:
        _emit(json.dumps(infeasible_dict(exc, args.method_tag), indent=2) + "\n", args.out)
        return EXIT_INFEASIBLE
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    sweep = cfgmod.sweep_from_config(cfg, seed=args.seed, trials=args.trials,
                                     tolerance=args.tolerance, max_iterations=args.max_iter)
    report = run_sweep(sweep, threads=args.threads)
    _emit(report.to_csv(), args.out)
    errors = [r for r in report.records if r.status == "error"]
    if errors:
        print(f"{len(errors)} trial point(s) failed; first: {errors[0].error}", file=sys.stderr)
    return EXIT_OK


def cmd_certify(args):
    cfg = _load(args)
    M = args.nodes
    oracle = args.oracle or ("grid" if M == 1 else "multistart")
    if oracle == "grid" and M > GRID_MAX_NODES:
        raise MecRelayError(f"oracle limited to M ≤ {GRID_MAX_NODES}")
    if M > 2:
        raise MecRelayError("oracle limited to M ≤ 2")
    tol = args.tolerance_certify or CERTIFY_TOL[M]
    system = cfgmod.system_from_config(cfg)
    geometry = cfgmod.geometry_from_config(cfg, M)
    nodes = cfgmod.nodes_from_config(cfg, M)
    means = cfgmod.means_from_config(cfg)
    settings = cfgmod.settings_from_config(cfg, args.tolerance, args.max_iter)
    seed = 0 if args.seed is None else args.seed
    lines = [f"{'trial':>5} {'solver':>16} {'oracle':>16} {'deviation':>11}"]
    worst = 0.0
    t0 = time.time()
    for i in range(args.trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        inst = random_feasible_instance(rng, system=system, means=means,
                                        geometry=geometry, nodes=nodes)
        got = solve_instance(inst, settings).primal_value
        if oracle == "grid":
            ref = grid_solve(inst, args.grid).objective
        else:
            ref = multistart_solve(inst, seed=i).objective
        dev = abs(got - ref) / abs(ref)
        worst = max(worst, dev)
        lines.append(f"{i:>5} {got:>16.6f} {ref:>16.6f} {dev:>11.3e}")
    ok = worst <= tol
    lines.append(f"worst deviation {worst:.3e} (tolerance {tol:g}, oracle {oracle}, "
                 f"M={M}, {time.time() - t0:.1f} s): {'PASS' if ok else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_ERROR


def build_parser():
    p = argparse.ArgumentParser(prog="mecrelay", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML config file (defaults: reference scenario)")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--tolerance", type=float, help="dual convergence tolerance (relative)")
        sp.add_argument("--max-iter", type=int, dest="max_iter", help="ellipsoid iteration cap")

    sp = sub.add_parser("solve", help="solve one instance and print the JSON report")
    common(sp)
    sp.add_argument("--method", choices=("optimal", "equal"), default="optimal",
                    help="processor split: proportional (optimal) or equal shares")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="Monte Carlo alpha sweep, CSV output")
    common(sp)
    sp.add_argument("--trials", type=int, help="channel realizations per grid point")
    sp.add_argument("--threads", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("certify", help="compare the solver with a brute-force oracle")
    common(sp)
    sp.add_argument("--nodes", type=int, default=1, help="IoT node count (1 or 2)")
    sp.add_argument("--trials", type=int, default=20, help="random feasible instances")
    sp.add_argument("--grid", type=int, help="grid points per axis for the grid oracle")
    sp.add_argument("--oracle", choices=("grid", "multistart"),
                    help="reference solver (default: grid for M=1, multistart otherwise)")
    sp.add_argument("--certify-tol", type=float, dest="tolerance_certify",
                    help="allowed relative deviation (default 1e-2 for M=1, 2e-2 for M=2)")
    sp.set_defaults(func=cmd_certify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve":
        args.method_tag = "equal" if args.method == "equal" else "proportional"
    try:
        if getattr(args, "trials", None) is not None and args.trials < 1:
            raise cfgmod.ConfigError("must be >= 1", field="trials")
        if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
            raise cfgmod.ConfigError("must be >= 1", field="threads")
        return args.func(args)
    except (MecRelayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
