"""Command-line front end: solve once, run convergence studies, audit rows.

Usage patterns:

    hybridfdm --problem ex31 --J 5 --out solution.csv
    hybridfdm --problem ex31 --J-range 5..7 --mode exact --out table.csv
    hybridfdm --problem ex34 --J-range 4..6 --mode successive
    hybridfdm --problem ex34 --J 5 --check-mmatrix

``--problem`` takes a builtin name or a configuration file path.  Solutions
are written as CSV (i, j, x, y, u_h); convergence tables as CSV rows
(J, h, error, order, wall_seconds).  All floats use repr-exact scientific
notation with 17 significant digits and a decimal point, independent of any
locale.  Exit codes: 0 success, 1 usage/config errors, 2 failed numerical
audit.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .assembly import assemble, audit_m_matrix, solve
from .errors import HybridFdmError
from .problems import BUILTIN_CONFIGS, ProblemSpec, builtin, load_config

FLOAT_FMT = "%.17e"


@dataclass
class ConvergenceRow:
    J: int
    h: float
    error: float
    order: float          # nan on the first row
    wall: float


def _load_problem(spec: str) -> ProblemSpec:
    if spec in BUILTIN_CONFIGS:
        return builtin(spec)
    if os.path.exists(spec):
        return load_config(spec)
    raise HybridFdmError(
        f"--problem {spec!r} is neither a builtin ({sorted(BUILTIN_CONFIGS)}) "
        "nor a config file")


def solve_once(problem: ProblemSpec, J: int, threads: int = 1):
    system = assemble(problem, J, threads=threads)
    result = solve(system)
    return system, result


def write_solution_csv(path, system, result):
    n1, n2 = system.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("i,j,x,y,u_h\r\n")
        for i in range(n1):
            x = FLOAT_FMT % system.xs[i]
            for j in range(n2):
                fh.write(f"{i},{j},{x},{FLOAT_FMT % system.ys[j]},"
                         f"{FLOAT_FMT % result.u[i, j]}\r\n")


def exact_error(problem: ProblemSpec, system, result) -> float:
    gx, gy = np.meshgrid(system.xs, system.ys, indexing="ij")
    return float(np.abs(result.u - problem.exact_u(gx, gy)).max())


def successive_error(u_coarse: np.ndarray, u_fine: np.ndarray) -> float:
    return float(np.abs(u_coarse - u_fine[::2, ::2]).max())


def run_convergence(problem: ProblemSpec, j_values, mode: str = "exact",
                    threads: int = 1):
    """Convergence table over ascending J values.

    ``exact`` compares against the attached solution at every J; the
    ``successive`` mode compares coincident nodes of consecutive grids, so
    the listed J values must be consecutive and the last solve only serves
    as the reference for its predecessor.
    """
    j_values = list(j_values)
    if sorted(j_values) != j_values:
        raise HybridFdmError("J range must be ascending")
    if mode == "exact" and not problem.has_exact:
        raise HybridFdmError(
            f"problem {problem.name!r} has no exact solution; use successive")
    if mode == "successive" and any(b - a != 1 for a, b in
                                    zip(j_values, j_values[1:])):
        raise HybridFdmError("successive mode requires consecutive J values")

    solves = {}
    for J in j_values:
        t0 = time.perf_counter()
        system, result = solve_once(problem, J, threads)
        solves[J] = (system, result, time.perf_counter() - t0)

    rows = []
    if mode == "exact":
        errs = {J: exact_error(problem, *solves[J][:2]) for J in j_values}
        listed = j_values
    else:
        errs = {J: successive_error(solves[J][1].u, solves[J + 1][1].u)
                for J in j_values[:-1]}
        listed = j_values[:-1]
    prev = None
    for J in listed:
        order = float("nan") if prev is None else float(np.log2(prev / errs[J]))
        rows.append(ConvergenceRow(J=J, h=solves[J][0].h, error=errs[J],
                                   order=order, wall=solves[J][2]))
        prev = errs[J]
    return rows


def average_order(rows) -> float:
    orders = [r.order for r in rows if np.isfinite(r.order)]
    return float(np.mean(orders)) if orders else float("nan")


def write_convergence_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("J,h,error,order,wall_seconds\r\n")
        for r in rows:
            fh.write(f"{r.J},{FLOAT_FMT % r.h},{FLOAT_FMT % r.error},"
                     f"{FLOAT_FMT % r.order},{FLOAT_FMT % r.wall}\r\n")


def read_convergence_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 5:
                continue
            rows.append(ConvergenceRow(J=int(parts[0]), h=float(parts[1]),
                                       error=float(parts[2]),
                                       order=float(parts[3]),
                                       wall=float(parts[4])))
    return rows


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _parse_range(text: str):
    try:
        a, b = text.split("..")
        a, b = int(a), int(b)
    except ValueError:
        raise HybridFdmError(f"--J-range expects a..b, got {text!r}")
    if b < a:
        raise HybridFdmError("--J-range must be ascending")
    return list(range(a, b + 1))


def main(argv=None) -> int:
    parser = _Parser(prog="hybridfdm",
                     description="Sixth-order hybrid FDM solver for 2D "
                                 "elliptic interface problems")
    parser.add_argument("--problem", required=True,
                        help="builtin name (ex31..ex34) or config file path")
    parser.add_argument("--J", type=int, default=None,
                        help="grid refinement level, h = width / 2^J")
    parser.add_argument("--J-range", dest="j_range", default=None,
                        help="run a convergence study over a..b")
    parser.add_argument("--mode", choices=("exact", "successive"),
                        default="exact", help="error definition for studies")
    parser.add_argument("--out", default=None, help="CSV output path")
    parser.add_argument("--threads", type=int, default=1,
                        help="stencil-generation worker processes")
    parser.add_argument("--check-mmatrix", action="store_true",
                        help="audit the sign/sum conditions instead of solving")
    args = parser.parse_args(argv)

    try:
        problem = _load_problem(args.problem)

        if args.check_mmatrix:
            if args.J is None:
                raise HybridFdmError("--check-mmatrix needs --J")
            system = assemble(problem, args.J, threads=args.threads)
            audit = audit_m_matrix(system)
            print(f"M-matrix audit of {problem.name!r} at J={args.J}:")
            print(f"  regular rows: {audit.n_regular} "
                  f"{'pass' if audit.regular_ok else 'FAIL'}")
            print(f"  edge rows:    {'pass' if audit.edge_ok else 'FAIL'}")
            print(f"  corner rows:  {'pass' if audit.corner_ok else 'FAIL'}")
            print(f"  matrix signs (non-interface rows): "
                  f"{'pass' if audit.matrix_signs_ok else 'FAIL'}")
            print(f"  interface rows (no M-matrix claim): {audit.n_irregular}")
            for v in audit.violations[:10]:
                print(f"  violation: {v}")
            return 0 if audit.passed and audit.matrix_signs_ok else 2

        if args.j_range is not None:
            rows = run_convergence(problem, _parse_range(args.j_range),
                                   mode=args.mode, threads=args.threads)
            print(f"{'J':>3} {'h':>12} {'error':>14} {'order':>7} {'wall':>9}")
            for r in rows:
                order = f"{r.order:7.2f}" if np.isfinite(r.order) else "      -"
                print(f"{r.J:>3} {r.h:12.6g} {r.error:14.6e} {order} "
                      f"{r.wall:8.2f}s")
            print(f"average order: {average_order(rows):.2f}")
            if args.out:
                write_convergence_csv(args.out, rows)
            return 0

        if args.J is None:
            raise HybridFdmError("need --J or --J-range")
        system, result = solve_once(problem, args.J, args.threads)
        print(f"solved {problem.name!r} at J={args.J}: "
              f"{system.shape[0]}x{system.shape[1]} nodes, "
              f"max|u_h| = {np.abs(result.u).max():.6g}, "
              f"residual = {result.residual:.2e}, "
              f"assemble {result.wall_assemble:.2f}s "
              f"solve {result.wall_solve:.2f}s")
        if args.out:
            write_solution_csv(args.out, system, result)
        return 0
    except HybridFdmError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
