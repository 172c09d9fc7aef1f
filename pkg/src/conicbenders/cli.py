"""Command-line front end: ``solve``, ``verify`` and ``oracle``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import io
from .errors import InputError
from .gbd import GbdStatus, gbd_solve
from .model import validate
from .subsolver import METHODS, SolverConfig
from .verify import CHECKS, brute_force_solve, run_checks

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3
EXIT_CHECKS_FAILED = 4

_STATUS_EXIT = {
    GbdStatus.EPS_OPTIMAL: EXIT_OK,
    GbdStatus.INFEASIBLE: EXIT_INFEASIBLE,
    GbdStatus.ITERATION_LIMIT: EXIT_NOT_CONVERGED,
    GbdStatus.SOLVER_BREAKDOWN: EXIT_NOT_CONVERGED,
}


def _positive(kind):
    def parse(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return parse


def _check_names(text):
    names = [t for t in text.split(",") if t]
    unknown = [t for t in names if t not in CHECKS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown check {', '.join(unknown) or text!r}")
    return names


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for infeasible instances
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="conicbenders", description="Benders decomposition for convex conic MINLP")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--inner-tol", type=_positive(float), default=None)
        p.add_argument("--dual-radius", type=_positive(float), default=None)
        p.add_argument("--method", choices=METHODS, default="conic",
                       help="subproblem backend (default: conic)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=None, help="write the JSON report here")

    p = sub.add_parser("solve", help="run the decomposition on an instance file")
    p.add_argument("path", type=Path)
    p.add_argument("--eps", type=_positive(float), default=1e-4)
    p.add_argument("--max-outer", type=_positive(int), default=None)
    solver_flags(p)

    p = sub.add_parser("verify", help="run the duality check battery")
    p.add_argument("path", type=Path)
    p.add_argument("--only", type=_check_names, action="extend", default=None, metavar="CHECK[,CHECK]",
                   help=f"repeatable subset of: {', '.join(CHECKS)}")
    p.add_argument("--grid", type=_positive(int), default=None, help="oracle grid density per dimension")
    solver_flags(p)

    p = sub.add_parser("oracle", help="grid brute-force optimum")
    p.add_argument("path", type=Path)
    p.add_argument("--grid", type=_positive(int), default=201)
    return ap


def _config(args, **extra):
    kw = {"method": args.method, **extra}
    if args.inner_tol is not None:
        kw["inner_tol"] = args.inner_tol
    if args.dual_radius is not None:
        kw["dual_radius"] = args.dual_radius
    return SolverConfig(**kw)


def _load(path):
    inst = io.load_instance(path)
    diags = validate(inst)
    if diags:
        raise InputError("\n".join(diags))
    return inst


def _emit(doc, out):
    text = io.dumps(doc)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_solve(args):
    inst = _load(args.path)
    cfg = _config(args, max_outer=args.max_outer)
    report = gbd_solve(inst, args.eps, cfg)
    _emit(io.report_to_dict(report, args.eps, cfg, args.seed), args.out)
    for line in report.diagnostics:
        print(line, file=sys.stderr)
    print(f"{report.status.value}: best value {report.best_value:.10g} "
          f"after {report.primal_solves} primal solves", file=sys.stderr)
    return _STATUS_EXIT[report.status]


def cmd_verify(args):
    inst = _load(args.path)
    cfg = _config(args)
    results = run_checks(inst, cfg, only=args.only, rng_seed=args.seed, grid_density=args.grid)
    ok = all(r.passed for r in results)
    doc = {"schema": io.SCHEMA, "instance": inst.name, "passed": ok, "seed": args.seed,
           "config": asdict(cfg), "checks": [r.to_dict() for r in results]}
    _emit(doc, args.out)
    for r in results:
        if not r.passed:
            print(f"FAIL {r.name} y={r.y}: {r.detail or r.value}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECKS_FAILED


def cmd_oracle(args):
    inst = _load(args.path)
    value, x, y = brute_force_solve(inst, args.grid)
    if math.isinf(value):
        print("value inf (no feasible grid point)")
    else:
        print(f"value {value:.10g}")
        print("x " + " ".join(f"{v:.10g}" for v in x))
        print("y " + " ".join(f"{v:.10g}" for v in y))
    return EXIT_OK


_COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:  # InputError, or an invalid solver configuration
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
