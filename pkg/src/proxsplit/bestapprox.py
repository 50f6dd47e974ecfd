"""Best approximation onto an intersection of affine preimages of convex sets.

Computes P_D z for  D = intersection_i {x : L_i x in r_i + C_i}  using only
projections onto the sets C_i.  The iteration is the composite-prox dual
splitting specialized to indicator functions with equal weights 1/m: each
dual update projects a shifted residual onto its set,

    v_i <- v_i + gamma lambda (L_i x - r_i - P_{C_i}(v_i / gamma + L_i x - r_i) - c_i,n),

where the optional perturbations c_i,n follow an explicitly summable decay
schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import Indicator
from .linops import LinearOperator, as_vector
from .sets import ConvexSet, set_from_config
from .solver import (
    CompositeProxProblem,
    Solution,
    SolverConfig,
    Term,
    Trace,
    _gap_fuzz,
    _Schedules,
    check_qualification,
)

__all__ = [
    "CompositeConstraint",
    "SummableErrorSchedule",
    "ProjectionConfig",
    "QualificationError",
    "project_intersection",
    "feasibility_residual",
    "encode_problem",
    "constraints_from_config",
]


class QualificationError(RuntimeError):
    """No sufficient qualification rule fired and the caller did not override."""


@dataclass
class CompositeConstraint:
    """One membership requirement  L x in shift + set."""

    op: LinearOperator
    shift: np.ndarray
    set: ConvexSet

    def __post_init__(self):
        self.shift = as_vector(self.shift, self.op.dim_out, "shift")
        if self.set.dim != self.op.dim_out:
            raise ValueError(
                f"set dimension {self.set.dim} does not match operator output {self.op.dim_out}")


@dataclass
class SummableErrorSchedule:
    """Perturbation magnitudes amplitude / (n+1)^exponent with exponent > 1.

    The exponent restriction makes the injected series summable, the shape
    the convergence guarantee tolerates.
    """

    amplitude: float
    exponent: float = 2.0
    seed: int = 0

    def __post_init__(self):
        self.amplitude = float(self.amplitude)
        self.exponent = float(self.exponent)
        if self.exponent <= 1.0:
            raise ValueError("exponent must exceed 1 for a summable schedule")

    def draw(self, i, n, dim):
        rng = np.random.default_rng((self.seed, i, n))
        direction = rng.standard_normal(dim)
        nd = np.linalg.norm(direction)
        if nd == 0.0:
            direction = np.zeros(dim)
            direction[0] = 1.0
            nd = 1.0
        return (self.amplitude / (n + 1.0) ** self.exponent) * (direction / nd)


@dataclass
class ProjectionConfig:
    """Schedules and stopping controls for the projection iteration.

    ``feasibility_tol`` defaults to 10 * tol: dual schemes approach
    feasibility in the limit only, so the feasibility gate is looser than
    the step gate.  ``stall_window`` consecutive stagnant iterations with
    the residual still above the gate flag the run as stalled.
    """

    tol: float = 1e-8
    max_iter: int = 100_000
    epsilon: float | None = None
    gamma: object = None
    lam: object = None
    feasibility_tol: float | None = None
    error_schedule: SummableErrorSchedule | None = None
    norm_override: list | None = None
    trace_every: int = 1
    stall_window: int = 50

    def resolved_feasibility_tol(self):
        return 10.0 * self.tol if self.feasibility_tol is None else self.feasibility_tol

    def as_solver_config(self):
        return SolverConfig(tol=self.tol, max_iter=self.max_iter, epsilon=self.epsilon,
                            gamma=self.gamma, lam=self.lam,
                            norm_override=self.norm_override, trace_every=self.trace_every)


def encode_problem(z, constraints):
    """Composite-prox encoding: indicator functions, equal weights 1/m."""
    m = len(constraints)
    if m == 0:
        raise ValueError("at least one constraint is required")
    return CompositeProxProblem(
        z, [Term(1.0 / m, Indicator(c.set), c.op, c.shift) for c in constraints])


def feasibility_residual(x, constraints):
    """max_i dist(L_i x - r_i, C_i) via the descriptors' distance formulas."""
    return max(c.set.distance(c.op.apply(x) - c.shift) for c in constraints)


def project_intersection(z, constraints, config=None, *, slater_point=None,
                         allow_unknown_qualification=False, callback=None):
    """Best approximation to ``z`` from the constraint intersection.

    Requires a sufficient qualification rule to fire (a Slater point can be
    supplied) unless ``allow_unknown_qualification`` acknowledges running
    without one.  Converged means the primal iterate stagnated and the
    feasibility residual dropped below the feasibility gate; stagnation
    with a persistent residual is flagged as "stalled" instead, since the
    intersection then looks empty.

    Returns
    -------
    (Solution, Trace)
    """
    config = config or ProjectionConfig()
    z = as_vector(z, name="z")
    constraints = list(constraints)
    problem = encode_problem(z, constraints)
    qual = check_qualification(problem, slater_point)
    if not qual.satisfied and not allow_unknown_qualification:
        raise QualificationError(
            f"qualification unknown ({qual.detail}); pass a Slater point or acknowledge")

    bounds = problem.norm_bounds(config.norm_override)
    sched = _Schedules(1.0 / max(bounds) ** 2, config.as_solver_config())
    feas_tol = config.resolved_feasibility_tol()
    m = len(constraints)
    v = [np.zeros(c.op.dim_out) for c in constraints]
    trace = Trace()
    offset = problem.duality_offset()
    gap_threshold = 0.5 * config.tol * config.tol if config.tol > 0 else -1.0

    def primal_point(v):
        acc = np.zeros(z.size)
        for c, vi in zip(constraints, v):
            acc += (1.0 / m) * c.op.adjoint(vi)
        return z - acc

    x = primal_point(v)
    x_prev = None
    streak = 0
    status = "max_iter"
    n = 0
    last_recorded = -1
    while True:
        step_norm = None if x_prev is None else float(np.linalg.norm(x - x_prev))
        residual = feasibility_residual(x, constraints)
        gamma_n = sched.gamma(n)
        lam_n = sched.lam(n)
        record = config.trace_every > 0 and n % config.trace_every == 0
        if record:
            primal = problem.primal_objective(x)
            dual = problem.dual_objective(v)
            trace.append(n, primal, dual, step_norm, gamma_n, lam_n)
            last_recorded = n
        if callback is not None:
            callback(n, x.copy(), [vi.copy() for vi in v])
        if config.tol > 0 and step_norm is not None:
            stagnant = step_norm <= config.tol * (1.0 + float(np.linalg.norm(x)))
            streak = streak + 1 if stagnant else 0
            if streak >= 3 and residual <= feas_tol:
                status = "converged"
                break
            if streak >= config.stall_window and residual > feas_tol:
                status = "stalled"
                break
            if record and dual is not None and np.isfinite(primal) and np.isfinite(dual) \
                    and residual <= feas_tol:
                fuzz = _gap_fuzz(problem, v, float(np.linalg.norm(x)), bounds)
                if primal + dual - offset <= gap_threshold - fuzz:
                    status = "converged"
                    break
        if n >= config.max_iter:
            break
        new_v = []
        for i, (c, vi) in enumerate(zip(constraints, v)):
            residual_vec = c.op.apply(x) - c.shift
            projected = c.set.project(vi / gamma_n + residual_vec)
            update = residual_vec - projected
            if config.error_schedule is not None:
                update = update - config.error_schedule.draw(i, n, c.op.dim_out)
            new_v.append(vi + gamma_n * lam_n * update)
        v = new_v
        x_prev = x
        x = primal_point(v)
        n += 1

    if last_recorded != n:
        trace.append(n, problem.primal_objective(x), problem.dual_objective(v),
                     None if x_prev is None else float(np.linalg.norm(x - x_prev)),
                     sched.gamma(n), sched.lam(n))
    trace.status = status
    trace.iterations = n
    return Solution(x=x, v=v, iterations=n, converged=status == "converged",
                    status=status), trace


def constraints_from_config(cfg, base_dir=None):
    """Parse ``{"z": [...], "constraints": [{operator, shift, set}], "slater": [...]}``.

    Returns (z, constraints, slater_point_or_None).
    """
    from .linops import operator_from_config

    z = as_vector(cfg["z"], name="z")
    entries = cfg.get("constraints", [])
    if not entries:
        raise ValueError("constraint list is empty")
    constraints = []
    for c in entries:
        op = operator_from_config(c["operator"], base_dir)
        shift = c.get("shift")
        constraints.append(CompositeConstraint(
            op, np.zeros(op.dim_out) if shift is None else shift,
            set_from_config(c["set"])))
    slater = cfg.get("slater")
    return z, constraints, None if slater is None else as_vector(slater, z.size, "slater")
