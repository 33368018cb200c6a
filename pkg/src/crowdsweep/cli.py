"""Command-line interface: ``crowdsweep <command> [flags]``.

Exit status is 0 on success, 1 when verification fails and 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path

from .errors import (
    BudgetExceededError,
    CrowdError,
    InfeasibleScenarioError,
    NoFeasibleBranchError,
    ScenarioError,
)
from .integrator import simulate
from .model import load_scenario, prox_constants
from .optimality import reconstruct_duals, verify
from .search import GridSpec, grid_search
from .two_body import TwoBodySolution, optimize

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


class InputError(Exception):
    """Bad command-line input; reported with exit status 2."""


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _scenario(path):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise InputError(f"scenario file not found: {path}") from None
    except InfeasibleScenarioError as exc:
        raise InputError(f"{path}: {exc}") from None
    except ScenarioError as exc:
        if str(exc).startswith("malformed"):
            raise InputError(str(exc)) from None
        raise InputError(f"invalid scenario {path}: {exc}") from None


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _two_participants(sc, path):
    if sc.n != 2:
        raise InputError(f"the closed-form solver needs exactly 2 participants, {path} has {sc.n}")


def cmd_simulate(args):
    sc = _scenario(args.scenario)
    a = _floats(args.a, "--a")
    try:
        traj = simulate(sc, a, args.steps, frozen_angles=args.frozen_angles)
    except ScenarioError as exc:
        raise InputError(str(exc)) from None
    with _sink(args.out) as fh:
        traj.to_csv(fh)
    return EXIT_OK


def cmd_solve2(args):
    sc = _scenario(args.scenario)
    _two_participants(sc, args.scenario)
    sol = optimize(sc)
    with _sink(args.out) as fh:
        json.dump(sol.to_dict(), fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_verify(args):
    sc = _scenario(args.scenario)
    _two_participants(sc, args.scenario)
    try:
        data = json.loads(Path(args.solution).read_text())
    except FileNotFoundError:
        raise InputError(f"solution file not found: {args.solution}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed solution JSON in {args.solution}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"solution JSON in {args.solution} must be an object")
    try:
        sol = TwoBodySolution.from_dict(data, sc)
    except ScenarioError as exc:
        raise InputError(f"invalid solution {args.solution}: {exc}") from None
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    # inconsistent stationarity shows up as failed conditions, not as an error
    cert = reconstruct_duals(sol, lam=args.lam, strict=False)
    report = verify(sol, cert, args.tol)
    with _sink(args.out) as fh:
        fh.write(report.to_json())
        fh.write("\n")
    return EXIT_OK if report.overall else EXIT_FAILED


def cmd_sweep(args):
    sc = _scenario(args.scenario)
    try:
        grid = GridSpec.parse(args.grid, args.steps, args.refine)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        res = grid_search(sc, grid, frozen_angles=not args.re_aim, budget=args.budget)
    except BudgetExceededError as exc:
        raise InputError(f"refusing sweep: {exc}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    with _sink(args.out) as fh:
        res.to_csv(fh)
    best = ",".join(repr(float(v)) for v in res.a)
    print(f"best a={best} J={res.J!r}", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_constants(args):
    try:
        c = prox_constants(args.n, args.R)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    with _sink(args.out) as fh:
        json.dump(c.to_dict(), fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crowdsweep", description="Controlled crowd motion toward an exit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the catching-up scheme and write a trajectory CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--a", required=True, help="comma-separated constant controls")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--frozen-angles", action="store_true", help="keep headings at their initial angles")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve2", help="closed-form optimum for two participants")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve2)

    p = sub.add_parser("verify", help="check the necessary optimality conditions for a solve2 result")
    p.add_argument("--scenario", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--lam", type=float, default=1.0, help="cost multiplier (0 probes the abnormal case)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="brute-force grid over constant controls")
    p.add_argument("--scenario", required=True)
    p.add_argument("--grid", required=True, help="LO:HI:STEP")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--re-aim", action="store_true", help="re-aim headings at the exit every step")
    p.add_argument("--refine", action="store_true", help="polish the best grid point locally")
    p.add_argument("--budget", type=int, default=10**7)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("constants", help="regularity constants of the n-disk feasible set")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_constants)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "steps", 1) < 1:
        print("error: --steps must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoFeasibleBranchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except CrowdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
