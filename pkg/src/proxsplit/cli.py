"""Command-line front end: load problems or images, run the solvers, emit CSVs.

Exit codes: 0 when the run converged, 2 when it stopped at the iteration
budget (or stalled), 1 on any input error.  Every run ends with a
machine-readable line  ``RESULT converged=<bool> iters=<n> primal=<v>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import imaging, pgm
from .bestapprox import (
    ProjectionConfig,
    constraints_from_config,
    feasibility_residual,
    project_intersection,
)
from .solver import SolverConfig, Trace, load_problem, solve

_PGM_SCALING_NOTE = (
    "PGM samples map linearly to reals: byte k reads as k/255; written images "
    "are clipped to [0, 1] and rounded back to bytes.  CSV grids keep raw reals."
)


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the exit-code contract
    # reserves 2 for hitting the iteration budget, so remap to 1.
    def error(self, message):
        raise _CliError(message)


@dataclass
class RunManifest:
    """A validated invocation: command, resolved paths, config overrides."""

    command: str
    input_path: str
    out_dir: str
    overrides: dict

    @classmethod
    def from_args(cls, command, args):
        path = getattr(args, "input", None)
        if path is not None and not os.path.isfile(path):
            raise _CliError(f"input file not found: {path}")
        out_dir = os.path.abspath(args.out) if getattr(args, "out", None) else os.getcwd()
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("func", "input", "out") and v is not None}
        return cls(command, path, out_dir, overrides)


def _fmt(value):
    return repr(float(value))


def _write_vector_csv(path, x):
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for v in np.asarray(x, dtype=float).ravel():
            f.write(_fmt(v) + "\n")


def _solver_config(args, trace_default=1):
    kwargs = {"trace_every": getattr(args, "trace_every", None) or trace_default}
    if args.tol is not None:
        kwargs["tol"] = args.tol
    if args.max_iter is not None:
        kwargs["max_iter"] = args.max_iter
    if args.gamma is not None:
        kwargs["gamma"] = args.gamma
    if getattr(args, "lam", None) is not None:
        kwargs["lam"] = args.lam
    return kwargs


def _finish(out_dir, sol_vector, trace, converged, iterations, extra_lines=()):
    os.makedirs(out_dir, exist_ok=True)
    solution_path = os.path.join(out_dir, "solution.csv")
    trace_path = os.path.join(out_dir, "trace.csv")
    _write_vector_csv(solution_path, sol_vector)
    trace.write_csv(trace_path)
    primal = trace.final()[1]
    for line in extra_lines:
        print(line)
    print(f"solution {solution_path}")
    print(f"trace {trace_path}")
    print(f"RESULT converged={str(bool(converged)).lower()} iters={iterations} "
          f"primal={_fmt(primal)}")
    return 0 if converged else 2


def cmd_solve(args):
    manifest = RunManifest.from_args("solve", args)
    problem = load_problem(manifest.input_path)
    config = SolverConfig(**_solver_config(args))
    solution, trace = solve(problem, config)
    return _finish(manifest.out_dir, solution.x, trace, solution.converged,
                   solution.iterations,
                   [f"status {solution.status}"])


def cmd_project(args):
    manifest = RunManifest.from_args("project", args)
    with open(manifest.input_path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    z, constraints, slater = constraints_from_config(
        cfg, base_dir=os.path.dirname(os.path.abspath(manifest.input_path)))
    config = ProjectionConfig(**_solver_config(args))
    solution, trace = project_intersection(
        z, constraints, config, slater_point=slater,
        allow_unknown_qualification=args.assume_qualified)
    residual = feasibility_residual(solution.x, constraints)
    return _finish(manifest.out_dir, solution.x, trace, solution.converged,
                   solution.iterations,
                   [f"status {solution.status}", f"feasibility_residual {_fmt(residual)}"])


def cmd_denoise(args):
    manifest = RunManifest.from_args("denoise", args)
    image = pgm.read_image(manifest.input_path)
    if args.noise:
        image = image + imaging.make_noise(image.shape, args.noise, seed=args.seed)
    weights = [float(w) for w in args.weights.split(",")]
    basis = imaging.haar_basis(image.shape) if args.basis == "haar" \
        else imaging.identity_basis(image.shape)
    model = imaging.MeasurementModel([_identity_for(image)], [image.ravel()], image.shape)
    config = SolverConfig(**_solver_config(args))
    recovered, trace = imaging.recover_image(model, basis, weights, config)

    os.makedirs(manifest.out_dir, exist_ok=True)
    noisy_path = os.path.join(manifest.out_dir, "input.csv")
    pgm.write_csv_image(noisy_path, image)
    out_pgm, out_csv = pgm.write_image_outputs(
        os.path.join(manifest.out_dir, "recovered"), recovered)
    trace_path = os.path.join(manifest.out_dir, "trace.csv")
    trace.write_csv(trace_path)

    obj_in = imaging.recovery_objective(model, basis, weights, image)
    obj_out = imaging.recovery_objective(model, basis, weights, recovered)
    converged = trace.status == "converged"
    print(f"status {trace.status}")
    print(f"tv_in {_fmt(imaging.tv(image))}")
    print(f"tv_out {_fmt(imaging.tv(recovered))}")
    print(f"objective_in {_fmt(obj_in)}")
    print(f"objective_out {_fmt(obj_out)}")
    print(f"input {noisy_path}")
    print(f"recovered {out_pgm} {out_csv}")
    print(f"trace {trace_path}")
    print(f"RESULT converged={str(converged).lower()} iters={trace.iterations} "
          f"primal={_fmt(trace.final()[1])}")
    return 0 if converged else 2


def _identity_for(image):
    from .linops import LinearOperator

    return LinearOperator.identity(image.size)


def cmd_trace_plot_data(args):
    manifest = RunManifest.from_args("trace-plot-data", args)
    trace = Trace.read_csv(manifest.input_path)
    if args.column not in Trace.COLUMNS[1:]:
        raise _CliError(f"unknown trace column {args.column!r}; "
                        f"choose from {', '.join(Trace.COLUMNS[1:])}")
    col = Trace.COLUMNS.index(args.column)
    lines = [f"{row[0]} {_fmt(row[col])}" for row in trace.rows if row[col] is not None]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        with open(args.output, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
        print(f"wrote {len(lines)} points to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _add_solver_flags(sp):
    sp.add_argument("--tol", type=float, default=None, help="stagnation tolerance")
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=None,
                    help="iteration budget")
    sp.add_argument("--gamma", type=float, default=None, help="constant step size")
    sp.add_argument("--lambda", dest="lam", type=float, default=None,
                    help="constant relaxation in (0, 1]")
    sp.add_argument("--trace-every", dest="trace_every", type=int, default=None,
                    help="record every k-th iteration (default 1)")
    sp.add_argument("--out", default=None, help="output directory (default: cwd)")


def build_parser():
    parser = _Parser(prog="proxsplit",
                     description="Composite prox, best approximation, and image "
                                 "recovery by dual splitting")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="composite prox problem from a JSON file")
    sp.add_argument("input", help="problem JSON")
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("project", help="best approximation onto constraint intersection")
    sp.add_argument("input", help="constraints JSON")
    _add_solver_flags(sp)
    sp.add_argument("--assume-qualified", action="store_true",
                    help="run even when no sufficient qualification rule fires")
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("denoise", help="image recovery from a PGM or CSV image",
                        description=_PGM_SCALING_NOTE)
    sp.add_argument("input", help="image file (.pgm or CSV grid)")
    _add_solver_flags(sp)
    sp.add_argument("--weights", default="0.6,0.1,0.3",
                    help="data, sparsity, and variation weights (sum to 1)")
    sp.add_argument("--noise", type=float, default=0.0,
                    help="amplitude of seeded Gaussian noise added to the input")
    sp.add_argument("--seed", type=int, default=0, help="noise seed")
    sp.add_argument("--basis", choices=("identity", "haar"), default="identity",
                    help="orthonormal coefficient basis")
    sp.set_defaults(func=cmd_denoise)

    sp = sub.add_parser("trace-plot-data", help="extract one trace column as plot data")
    sp.add_argument("input", help="trace CSV")
    sp.add_argument("--column", default="primal",
                    help="one of primal, dual, step_norm, gamma, lambda")
    sp.add_argument("--output", default=None, help="write points here instead of stdout")
    sp.set_defaults(func=cmd_trace_plot_data)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
