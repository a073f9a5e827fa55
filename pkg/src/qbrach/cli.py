"""Command-line interface: load problems, dispatch solvers, emit results.

Subcommands: solve-free, solve-closed, solve-m1, solve-2qubit, shoot,
verify, sweep-m1.  Solutions are written as JSON (deterministic float
formatting at 17 significant digits, so identical inputs give byte-identical
output); `--csv` adds a plot-ready table of t, multipliers, energy spread
and constraint residuals.  Exit codes: 0 success, 1 validation failure,
2 no solution, 3 numerical failure.  Set QB_LOG=debug|info|warning for
logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Optional, Tuple

import numpy as np

from .algebra import build_gellmann_basis, build_pauli_string_basis
from .dynamics import ControlProblem, MultiplierVector, Trajectory, _from_pairs
from .solvers import (
    ExtremalSolution,
    NoSolutionError,
    shoot,
    solve_closed_subalgebra,
    solve_free,
    solve_m1_two_level,
    solve_two_qubit_example,
    sweep_m1,
)
from .states import PureState
from .verify import Tolerances, certify

log = logging.getLogger("qbrach")


# -- deterministic JSON ------------------------------------------------------


def _emit_json(obj) -> str:
    """Serialize with floats at 17 significant digits (exact float64 round-trip)."""
    parts: list = []
    _emit(obj, parts)
    return "".join(parts)


def _emit(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            out.append("NaN")
        elif math.isinf(x):
            out.append("Infinity" if x > 0 else "-Infinity")
        else:
            out.append(format(x, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        for i, v in enumerate(seq):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise ValueError(f"cannot serialize object of type {type(obj).__name__}")


def _write_output(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# -- problem files -----------------------------------------------------------


def _load_problem(path: str) -> Tuple[ControlProblem, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if int(data.get("version", 1)) != 1:
        raise ValueError(f"unsupported problem-file version {data.get('version')}")
    if "dimension" not in data or "omega" not in data or "psi_i" not in data:
        raise ValueError("problem file needs 'dimension', 'omega' and 'psi_i'")
    N = int(data["dimension"])
    kind = data.get("basis", "gellmann")
    if kind == "gellmann":
        basis = build_gellmann_basis(N)
    elif kind == "pauli_strings":
        n = round(math.log2(N))
        if 2**n != N:
            raise ValueError(
                f"pauli_strings basis needs a power-of-two dimension, got {N}"
            )
        basis = build_pauli_string_basis(n)
    else:
        raise ValueError(f"unknown basis kind {kind!r}")
    psi_i = PureState(_from_pairs(data["psi_i"]))
    psi_f = PureState(_from_pairs(data["psi_f"])) if data.get("psi_f") is not None else None
    forbidden = tuple(data.get("forbidden", ()))
    problem = ControlProblem(
        basis=basis,
        psi_i=psi_i,
        omega=float(data["omega"]),
        forbidden=forbidden,
        psi_f=psi_f,
    )
    return problem, dict(data.get("solver_params", {}))


def _check_solver_field(path: str, expected: Tuple[str, ...]) -> None:
    with open(path, "r", encoding="utf-8") as fh:
        solver = json.load(fh).get("solver")
    if solver is not None and solver not in expected:
        raise ValueError(
            f"problem file names solver {solver!r} but the subcommand runs {expected[0]!r}"
        )


def _seed_from_params(params: dict, problem: ControlProblem) -> Tuple[np.ndarray, MultiplierVector]:
    if "H0" not in params:
        raise ValueError("solver_params must supply the seed Hamiltonian 'H0' as [re, im] pairs")
    H0 = _from_pairs(params["H0"])
    lam0 = float(params.get("lambda0", 1.0))
    lams = np.asarray(params.get("lambdas", np.zeros(problem.n_forbidden)), dtype=float)
    return H0, MultiplierVector(lam0, lams)


def _parse_grid(spec: str) -> Tuple[np.ndarray, np.ndarray]:
    """Parse 'a,b,n x c,d,m' (or with the multiplication sign) into two grids."""
    txt = spec.replace("×", "x")
    if "x" in txt:
        left, _, right = txt.partition("x")
        halves = [left, right]
    else:
        flat = [p for p in txt.split(",") if p.strip() != ""]
        if len(flat) != 6:
            raise ValueError(
                "grid must be 'min,max,n x min,max,m' (six numbers); got " + spec
            )
        halves = [",".join(flat[:3]), ",".join(flat[3:])]
    grids = []
    for half in halves:
        vals = [p.strip() for p in half.split(",") if p.strip() != ""]
        if len(vals) != 3:
            raise ValueError(f"each grid half needs 'min,max,count': {half!r}")
        lo, hi, n = float(vals[0]), float(vals[1]), int(vals[2])
        if n < 1:
            raise ValueError(f"grid count must be at least 1, got {n}")
        grids.append(np.linspace(lo, hi, n))
    return grids[0], grids[1]


def _solution_out(args, sol: ExtremalSolution) -> None:
    _write_output(_emit_json(sol.to_dict()), args.output)
    if getattr(args, "csv", None):
        if sol.trajectory is None:
            raise ValueError("the degenerate T = 0 solution has no trajectory to export")
        sol.trajectory.to_csv(args.csv)


# -- subcommand handlers -----------------------------------------------------


def _cmd_solve_free(args) -> int:
    problem, params = _load_problem(args.input)
    _check_solver_field(args.input, ("free",))
    if problem.psi_f is None:
        raise ValueError("solve-free needs 'psi_f' in the problem file")
    dt = args.dt if args.dt is not None else params.get("dt")
    sol = solve_free(problem.psi_i, problem.psi_f, problem.omega, dt=dt)
    _solution_out(args, sol)
    return 0


def _cmd_solve_closed(args) -> int:
    problem, params = _load_problem(args.input)
    _check_solver_field(args.input, ("closed_subalgebra",))
    H0, m0 = _seed_from_params(params, problem)
    t_max = args.t_max if args.t_max is not None else params.get("t_max")
    if t_max is None:
        raise ValueError("solve-closed needs --t-max (or solver_params.t_max)")
    dt = args.dt if args.dt is not None else params.get("dt")
    sol = solve_closed_subalgebra(problem, H0, m0, float(t_max), dt=dt)
    _solution_out(args, sol)
    return 0


def _cmd_solve_m1(args) -> int:
    params: dict = {}
    file_omega = None
    if args.input:
        _check_solver_field(args.input, ("m1_two_level",))
        with open(args.input, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        params = dict(data.get("solver_params", {}))
        file_omega = data.get("omega")
    omega_b = args.omega_b if args.omega_b is not None else params.get("omega_b")
    phi = args.phi if args.phi is not None else params.get("phi")
    omega = args.omega if args.omega is not None else file_omega
    if omega_b is None or phi is None or omega is None:
        raise ValueError("solve-m1 needs --omega-b, --phi and --omega")
    branches = solve_m1_two_level(
        float(omega_b),
        float(phi),
        float(omega),
        k_max=int(params.get("k_max", 20)),
        l_max=int(params.get("l_max", 20)),
    )
    doc = {
        "kind": "m1_two_level",
        "T_min": branches[0].T,
        "n_branches": len(branches),
        "branches": [sol.to_dict() for sol in branches],
    }
    _write_output(_emit_json(doc), args.output)
    if args.csv:
        branches[0].trajectory.to_csv(args.csv)
    return 0


def _cmd_solve_2qubit(args) -> int:
    if args.omega_b is None or args.omega is None:
        raise ValueError("solve-2qubit needs --omega-b and --omega")
    sol = solve_two_qubit_example(args.omega_b, args.omega, dt=args.dt)
    _solution_out(args, sol)
    return 0


def _cmd_shoot(args) -> int:
    problem, params = _load_problem(args.input)
    _check_solver_field(args.input, ("shot", "shoot"))
    H0, m0 = _seed_from_params(params, problem)
    t_max = args.t_max if args.t_max is not None else params.get("t_max")
    if t_max is None:
        raise ValueError("shoot needs --t-max (or solver_params.t_max)")
    dt = args.dt if args.dt is not None else params.get("dt")
    target = params.get("target_bures_angle")
    if args.target_bures_angle is not None:
        target = args.target_bures_angle
    sol = shoot(
        problem,
        H0,
        m0,
        float(t_max),
        dt=dt,
        target_bures_angle=float(target) if target is not None else None,
    )
    _solution_out(args, sol)
    return 0


def _verify_one(traj_dict: dict, embedded: Optional[dict], args) -> bool:
    traj = Trajectory.from_dict(traj_dict)
    tols = Tolerances.analytic() if args.tol == "analytic" else Tolerances.integrated()
    report = certify(traj, tols, gate=args.gate)
    sys.stdout.write(report.render_table() + "\n")
    ok = report.passed
    if embedded is not None:
        worst = 0.0
        fresh = report.as_dict()
        for key, old in embedded.items():
            if key in ("verdict",) or key not in fresh:
                continue
            new = fresh[key]
            if isinstance(old, bool) or isinstance(new, bool) or old is None or new is None:
                continue
            if isinstance(old, (int, float)) and isinstance(new, (int, float)):
                worst = max(worst, abs(float(new) - float(old)))
        sys.stdout.write(
            f"round-trip agreement with embedded report: max deviation {worst:.3e}\n"
        )
        if worst > 1e-12:
            sys.stdout.write("round-trip FAIL: recomputed residuals deviate beyond 1e-12\n")
            ok = False
    return ok


def _cmd_verify(args) -> int:
    with open(args.path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    ok = True
    if "branches" in data:
        for k, sol in enumerate(data["branches"]):
            sys.stdout.write(f"-- branch {k} --\n")
            if sol.get("trajectory") is None:
                raise ValueError(f"branch {k} carries no trajectory")
            ok = _verify_one(sol["trajectory"], sol.get("report"), args) and ok
    elif "trajectory" in data:
        if data["trajectory"] is None:
            raise ValueError("the solution carries no trajectory (degenerate T = 0)")
        ok = _verify_one(data["trajectory"], data.get("report"), args)
    elif "times" in data:
        ok = _verify_one(data, None, args)
    else:
        raise ValueError(
            "unrecognized file: expected a solution (with 'trajectory'), a "
            "branch list, or a bare trajectory (with 'times')"
        )
    return 0 if ok else 1


def _cmd_sweep_m1(args) -> int:
    if not args.grid:
        raise ValueError("sweep-m1 needs --grid 'min,max,n x min,max,m'")
    lam_grid, t_grid = _parse_grid(args.grid)
    fields = sweep_m1(lam_grid, t_grid, omega=args.omega)
    doc = {
        "kind": "sweep_m1",
        "omega": args.omega,
        "lambda1_tilde": fields["lambda1_tilde"],
        "T": fields["T"],
        "amplitude": fields["amplitude"],
        "im_field": fields["im_field"],
        "re_field": fields["re_field"],
    }
    _write_output(_emit_json(doc), args.output)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("lambda1_tilde,T,amplitude,im_field,re_field\n")
            for i, lam in enumerate(fields["lambda1_tilde"]):
                for j, t in enumerate(fields["T"]):
                    fh.write(
                        f"{lam:.17g},{t:.17g},{fields['amplitude'][i, j]:.17g},"
                        f"{fields['im_field'][i, j]:.17g},{fields['re_field'][i, j]:.17g}\n"
                    )
    return 0


# -- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbrach",
        description="Minimum-time quantum evolution under energy and "
        "forbidden-direction constraints: solvers and verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input: bool = False, input_optional: bool = False):
        if needs_input or input_optional:
            p.add_argument(
                "--input", "-i", required=needs_input, help="problem JSON file"
            )
        p.add_argument("--output", "-o", default=None, help="output JSON (default stdout)")
        p.add_argument("--csv", default=None, help="also write a plot-ready CSV table")
        p.add_argument("--dt", type=float, default=None, help="sample/integration step")

    p = sub.add_parser("solve-free", help="unrestricted minimum-time evolution")
    common(p, needs_input=True)
    p.set_defaults(func=_cmd_solve_free)

    p = sub.add_parser("solve-closed", help="closed-subalgebra constant-multiplier solution")
    common(p, needs_input=True)
    p.add_argument("--t-max", type=float, default=None, help="endpoint search window")
    p.set_defaults(func=_cmd_solve_closed)

    p = sub.add_parser("solve-m1", help="two-level problem with sigma_z forbidden")
    common(p, input_optional=True)
    p.add_argument("--omega-b", type=float, default=None, help="Bures angle")
    p.add_argument("--phi", type=float, default=None, help="relative phase of the target")
    p.add_argument("--omega", type=float, default=None, help="energy scale")
    p.set_defaults(func=_cmd_solve_m1)

    p = sub.add_parser("solve-2qubit", help="two-qubit example with local terms forbidden")
    common(p)
    p.add_argument("--omega-b", type=float, default=None, help="Bures angle")
    p.add_argument("--omega", type=float, default=None, help="energy scale")
    p.set_defaults(func=_cmd_solve_2qubit)

    p = sub.add_parser("shoot", help="forward shooting to the endpoint condition")
    common(p, needs_input=True)
    p.add_argument("--t-max", type=float, default=None, help="integration window")
    p.add_argument(
        "--target-bures-angle",
        type=float,
        default=None,
        help="stopping angle when the endpoint condition is degenerate",
    )
    p.set_defaults(func=_cmd_shoot)

    p = sub.add_parser("verify", help="re-certify a stored trajectory or solution")
    p.add_argument("path", help="solution or trajectory JSON file")
    p.add_argument(
        "--tol",
        choices=("analytic", "integrated"),
        default="integrated",
        help="tolerance preset (default integrated)",
    )
    p.add_argument(
        "--gate",
        action="store_true",
        help="also check the trace form Tr[H(T)F(T)] = 1",
    )
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sweep-m1", help="endpoint-condition fields on a (lambda1~, T) grid")
    p.add_argument("--grid", required=True, help="'min,max,n x min,max,m'")
    p.add_argument("--omega", type=float, default=10.0, help="energy scale (default 10)")
    p.add_argument("--output", "-o", default=None, help="output JSON (default stdout)")
    p.add_argument("--csv", default=None, help="also write the grid as CSV rows")
    p.set_defaults(func=_cmd_sweep_m1)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("QB_LOG", "").upper()
    if level:
        logging.basicConfig(level=getattr(logging, level, logging.INFO))
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoSolutionError as exc:
        sys.stderr.write(f"no solution: {exc}\n")
        return 2
    except ArithmeticError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
