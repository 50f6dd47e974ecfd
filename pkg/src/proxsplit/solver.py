"""Dual splitting solver for proximity operators of weighted sums of composite functions.

Solves  minimize  sum_i w_i g_i(L_i x - r_i) + |x - z|^2 / 2  by iterating on
dual variables v_i, one per term: at each sweep the primal iterate is
x = z - sum_i w_i L_i^* v_i and every v_i is relaxed toward the conjugate
prox of g_i evaluated at v_i + gamma (L_i x - r_i).  The primal iterates
converge strongly to the unique minimizer for any step sizes
gamma_n in [eps, 2 rho - eps] with rho = (max_i |L_i|)^(-2) and relaxations
lambda_n in [eps, 1].
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .functions import MEMBERSHIP_TOL, ProxFunction, function_from_config
from .linops import DimensionMismatch, LinearOperator, as_vector, operator_from_config

__all__ = [
    "ScheduleError",
    "Term",
    "CompositeProxProblem",
    "SolverConfig",
    "SolverState",
    "DykstraState",
    "Solution",
    "Trace",
    "solve",
    "step",
    "solve_dykstra",
    "primal_objective",
    "dual_objective",
    "check_qualification",
    "QualificationReport",
    "check_weights",
    "make_decay_injector",
    "problem_from_config",
    "load_problem",
]

WEIGHT_SUM_TOL = 1e-12


class ScheduleError(ValueError):
    """A step-size or relaxation value falls outside its admissible range."""


def check_weights(weights, count=None):
    """Validate weights in (0, 1] summing to one; returns them as an array."""
    w = as_vector(weights, count, "weights")
    if np.any(w <= 0) or np.any(w > 1):
        raise ValueError("weights must lie in (0, 1]")
    if abs(float(np.sum(w)) - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1, got {float(np.sum(w))!r}")
    return w


@dataclass
class Term:
    """One composite summand: weight * g(L x - shift)."""

    weight: float
    fn: ProxFunction
    op: LinearOperator
    shift: np.ndarray

    def __post_init__(self):
        self.weight = float(self.weight)
        self.shift = as_vector(self.shift, self.op.dim_out, "shift")
        if self.fn.dim is not None and self.fn.dim != self.op.dim_out:
            raise DimensionMismatch(
                f"function expects dimension {self.fn.dim}, operator produces {self.op.dim_out}")


class CompositeProxProblem:
    """The data (z, (w_i, g_i, L_i, r_i)) of a composite prox evaluation."""

    def __init__(self, z, terms):
        self.z = as_vector(z, name="z")
        self.terms = list(terms)
        if not self.terms:
            raise ValueError("problem needs at least one term")
        for t in self.terms:
            if t.op.dim_in != self.dim:
                raise DimensionMismatch(
                    f"operator input dimension {t.op.dim_in} does not match dim {self.dim}")
        check_weights([t.weight for t in self.terms])

    @property
    def dim(self):
        return self.z.size

    def norm_bounds(self, override=None):
        """Per-term operator-norm upper bounds, honoring an override list."""
        if override is not None:
            bounds = [float(b) for b in override]
            if len(bounds) != len(self.terms):
                raise ValueError("norm_override must give one bound per term")
        else:
            bounds = [t.op.norm_bound for t in self.terms]
        if min(bounds) <= 0:
            raise ValueError("every operator must be nonzero (positive norm bound)")
        return bounds

    def rho(self, override=None):
        """Base step-size scale (max operator-norm bound)^(-2)."""
        return 1.0 / max(self.norm_bounds(override)) ** 2

    def primal_objective(self, x):
        x = as_vector(x, self.dim, "x")
        total = 0.5 * float(np.sum((x - self.z) ** 2))
        for t in self.terms:
            val = t.fn(t.op.apply(x) - t.shift)
            if val == math.inf:
                return math.inf
            total += t.weight * val
        return total

    def dual_objective(self, v):
        """Dual value at (v_i), or None when some conjugate lacks a closed form."""
        acc = np.zeros(self.dim)
        coupling = 0.0
        for t, vi in zip(self.terms, v):
            vi = as_vector(vi, t.op.dim_out, "dual variable")
            conj = t.fn.conjugate_value(vi)
            if conj is None:
                return None
            if conj == math.inf:
                return math.inf
            coupling += t.weight * (conj + float(vi @ t.shift))
            acc += t.weight * t.op.adjoint(vi)
        return 0.5 * float(np.sum((self.z - acc) ** 2)) + coupling

    def duality_offset(self):
        """Constant c with  primal optimum + dual optimum = c  ( = |z|^2 / 2)."""
        return 0.5 * float(np.sum(self.z * self.z))


def primal_objective(problem, x):
    """Objective sum_i w_i g_i(L_i x - r_i) + |x - z|^2 / 2 (extended-real)."""
    return problem.primal_objective(x)


def dual_objective(problem, v):
    """Dual objective at (v_i); None when not evaluable in closed form."""
    return problem.dual_objective(v)


@dataclass
class SolverConfig:
    """Iteration schedules and stopping controls.

    ``gamma`` and ``lam`` may be constants or callables of the iteration
    index; defaults are gamma = rho and lam = 1.  ``epsilon`` defaults to
    1e-3 * min(1, rho).  ``tol <= 0`` disables the stagnation rule (the run
    goes to ``max_iter``).  ``error_injector(i, n)`` may return a
    perturbation added to the i-th conjugate-prox output at iteration n.
    ``trace_every = k`` records every k-th iteration plus the final one;
    0 records only the final one.
    """

    tol: float = 1e-8
    max_iter: int = 100_000
    epsilon: float | None = None
    gamma: object = None
    lam: object = None
    v0: list | None = None
    error_injector: object = None
    norm_override: list | None = None
    trace_every: int = 1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.trace_every < 0:
            raise ValueError("trace_every must be >= 0")


class _Schedules:
    """Validated per-iteration draws of (gamma_n, lambda_n)."""

    def __init__(self, rho, config):
        self.rho = rho
        eps = config.epsilon if config.epsilon is not None else 1e-3 * min(1.0, rho)
        if not 0.0 < eps < min(1.0, rho):
            raise ScheduleError(f"epsilon must lie in (0, min(1, rho)) = (0, {min(1.0, rho)})")
        self.eps = eps
        self._gamma = config.gamma if config.gamma is not None else rho
        self._lam = config.lam if config.lam is not None else 1.0
        self._slack = 1e-12 * max(1.0, rho)
        # eagerly reject constant schedules so bad configs fail before iterating
        if not callable(self._gamma):
            self.gamma(0)
        if not callable(self._lam):
            self.lam(0)

    def gamma(self, n):
        g = float(self._gamma(n)) if callable(self._gamma) else float(self._gamma)
        if not (self.eps - self._slack <= g <= 2.0 * self.rho - self.eps + self._slack):
            raise ScheduleError(
                f"gamma_{n} = {g} outside [eps, 2 rho - eps] = [{self.eps}, {2 * self.rho - self.eps}]")
        return g

    def lam(self, n):
        l = float(self._lam(n)) if callable(self._lam) else float(self._lam)
        if not (self.eps - 1e-15 <= l <= 1.0):
            raise ScheduleError(f"lambda_{n} = {l} outside [eps, 1] = [{self.eps}, 1]")
        return l


@dataclass
class SolverState:
    """Iteration snapshot: counter, dual variables, and the matching primal point."""

    n: int
    v: list
    x: np.ndarray


@dataclass
class DykstraState:
    """Iteration snapshot of the averaged-correction scheme."""

    n: int
    x: np.ndarray
    z_aux: list


@dataclass
class Solution:
    """Final iterates plus convergence status; x = z - sum_i w_i L_i^* v_i exactly."""

    x: np.ndarray
    v: list
    iterations: int
    converged: bool
    status: str
    certificate: object = None


class Trace:
    """Per-iteration solve records, exportable as CSV.

    ``status`` and ``iterations`` carry the terminal outcome of the run that
    produced the trace (set by the solvers).
    """

    COLUMNS = ("n", "primal", "dual", "step_norm", "gamma", "lambda")

    def __init__(self):
        self.rows = []
        self.status = None
        self.iterations = None

    def append(self, n, primal, dual, step_norm, gamma, lam):
        self.rows.append((int(n), primal, dual, step_norm, gamma, lam))

    def __len__(self):
        return len(self.rows)

    def final(self):
        return self.rows[-1]

    def write_csv(self, target):
        if hasattr(target, "write"):
            self._write(target)
        else:
            with open(target, "w", encoding="ascii", newline="\n") as f:
                self._write(f)

    def _write(self, f):
        f.write(",".join(self.COLUMNS) + "\n")
        for row in self.rows:
            f.write(",".join("" if c is None else repr(c) if isinstance(c, int) else repr(float(c))
                             for c in row) + "\n")

    @classmethod
    def read_csv(cls, target):
        trace = cls()
        with open(target, "r", encoding="ascii") as f:
            header = f.readline().strip().split(",")
            if tuple(header) != cls.COLUMNS:
                raise ValueError(f"unexpected trace header: {header}")
            for line in f:
                cells = line.rstrip("\n").split(",")
                trace.append(int(cells[0]),
                             *(None if c == "" else float(c) for c in cells[1:]))
        return trace


def _primal_point(problem, v):
    acc = np.zeros(problem.dim)
    for t, vi in zip(problem.terms, v):
        acc += t.weight * t.op.adjoint(vi)
    return problem.z - acc


def _gap_fuzz(problem, v, x_norm, bounds):
    """Bound on how far the membership-tolerant dual can under-report.

    Conjugate indicators grant value 0 up to MEMBERSHIP_TOL outside their
    domain, so the computed dual may undercut the true dual by the domain
    displacement times the dual gradient scale.  A primal-dual gap only
    certifies optimality once this fuzz is subtracted.
    """
    total = 0.0
    for t, vi, b in zip(problem.terms, v, bounds):
        displacement = MEMBERSHIP_TOL * (1.0 + float(np.linalg.norm(vi)))
        total += t.weight * (b * x_norm + float(np.linalg.norm(t.shift))) * displacement
    return total


def _dual_sweep(problem, v, x, gamma_n, lam_n, n, injector):
    new_v = []
    for i, (t, vi) in enumerate(zip(problem.terms, v)):
        u = vi + gamma_n * (t.op.apply(x) - t.shift)
        p = t.fn.prox_conjugate(gamma_n, u)
        if injector is not None:
            a = injector(i, n)
            if a is not None:
                p = p + as_vector(a, t.op.dim_out, "injected error")
        new_v.append(vi + lam_n * (p - vi))
    return new_v


def _initial_duals(problem, config):
    if config.v0 is None:
        return [np.zeros(t.op.dim_out) for t in problem.terms]
    if len(config.v0) != len(problem.terms):
        raise ValueError("v0 must give one vector per term")
    return [as_vector(v, t.op.dim_out, "v0").copy()
            for v, t in zip(config.v0, problem.terms)]


def solve(problem, config=None, *, callback=None):
    """Run the dual splitting iteration on ``problem``.

    Stops once the primal step norm satisfies
    ``|x_n - x_{n-1}| <= tol (1 + |x_n|)`` for three consecutive iterations,
    or once the primal-dual objective gap (when the dual is evaluable at a
    traced iteration) falls below ``tol^2 / 2`` minus the dual evaluation
    fuzz; the gap threshold converts to ``|x - x*| <= tol`` through the unit
    strong convexity of the objective.  Hitting ``max_iter`` returns a
    non-converged Solution rather than raising: partial iterates are
    diagnostically valuable.

    Returns
    -------
    (Solution, Trace)
    """
    config = config or SolverConfig()
    bounds = problem.norm_bounds(config.norm_override)
    sched = _Schedules(1.0 / max(bounds) ** 2, config)
    v = _initial_duals(problem, config)
    trace = Trace()
    offset = problem.duality_offset()
    gap_threshold = 0.5 * config.tol * config.tol if config.tol > 0 else -1.0

    x_prev = None
    streak = 0
    status = "max_iter"
    n = 0
    last_recorded = -1
    x = _primal_point(problem, v)
    while True:
        step_norm = None if x_prev is None else float(np.linalg.norm(x - x_prev))
        record = config.trace_every > 0 and n % config.trace_every == 0
        gamma_n = sched.gamma(n)
        lam_n = sched.lam(n)
        if record:
            primal = problem.primal_objective(x)
            dual = problem.dual_objective(v)
            trace.append(n, primal, dual, step_norm, gamma_n, lam_n)
            last_recorded = n
        if callback is not None:
            callback(SolverState(n, [vi.copy() for vi in v], x.copy()))
        if config.tol > 0 and step_norm is not None:
            if step_norm <= config.tol * (1.0 + float(np.linalg.norm(x))):
                streak += 1
            else:
                streak = 0
            if streak >= 3:
                status = "converged"
                break
            if record and dual is not None and math.isfinite(primal) and math.isfinite(dual):
                fuzz = _gap_fuzz(problem, v, float(np.linalg.norm(x)), bounds)
                if primal + dual - offset <= gap_threshold - fuzz:
                    status = "converged"
                    break
        if n >= config.max_iter:
            break
        v = _dual_sweep(problem, v, x, gamma_n, lam_n, n, config.error_injector)
        x_prev = x
        x = _primal_point(problem, v)
        n += 1

    if last_recorded != n:
        trace.append(n, problem.primal_objective(x), problem.dual_objective(v),
                     None if x_prev is None else float(np.linalg.norm(x - x_prev)),
                     sched.gamma(n), sched.lam(n))
    trace.status = status
    trace.iterations = n
    return Solution(x=x, v=v, iterations=n, converged=status == "converged",
                    status=status), trace


def step(problem, config, state):
    """One full sweep from ``state``: recompute x_n, update every dual variable.

    Returns a new SolverState at n+1 whose x matches its duals exactly.
    """
    config = config or SolverConfig()
    sched = _Schedules(problem.rho(config.norm_override), config)
    x_n = _primal_point(problem, state.v)
    new_v = _dual_sweep(problem, state.v, x_n, sched.gamma(state.n), sched.lam(state.n),
                        state.n, config.error_injector)
    return SolverState(state.n + 1, new_v, _primal_point(problem, new_v))


def solve_dykstra(z, weights, functions, config=None, *, callback=None):
    """Averaged parallel correction scheme for prox of sum_i w_i g_i at z.

    All functions live on the space of z (identity operators, zero shifts).
    Maintains auxiliary points z_i with  x_{n+1} = sum_i w_i prox_{g_i} z_i,n
    and  z_i,n+1 = x_{n+1} + z_i,n - prox_{g_i} z_i,n ; the weighted mean of
    the z_i stays equal to z throughout.  Produces the same primal iterates
    as ``solve`` with gamma = lambda = 1 and zero dual initialization.
    """
    config = config or SolverConfig()
    for value, name in ((config.gamma, "gamma"), (config.lam, "lam")):
        if value is not None and (callable(value) or float(value) != 1.0):
            raise ScheduleError(f"the averaged correction scheme fixes {name} = 1")
    z = as_vector(z, name="z")
    functions = list(functions)
    w = check_weights(weights, len(functions))
    problem = CompositeProxProblem(
        z, [Term(wi, g, LinearOperator.identity(z.size), np.zeros(z.size))
            for wi, g in zip(w, functions)])

    x = z.copy()
    z_aux = [z.copy() for _ in functions]
    trace = Trace()
    status = "max_iter"
    streak = 0
    n = 0
    last_recorded = -1
    while True:
        record = config.trace_every > 0 and n % config.trace_every == 0
        if record:
            v = [zi - x for zi in z_aux]
            trace.append(n, problem.primal_objective(x), problem.dual_objective(v),
                         None, 1.0, 1.0)
            last_recorded = n
        if callback is not None:
            callback(DykstraState(n, x.copy(), [zi.copy() for zi in z_aux]))
        if n >= config.max_iter:
            break
        proxes = [g.prox(1.0, zi) for g, zi in zip(functions, z_aux)]
        x_new = np.zeros(z.size)
        for wi, p in zip(w, proxes):
            x_new += wi * p
        z_aux = [x_new + zi - p for zi, p in zip(z_aux, proxes)]
        step_norm = float(np.linalg.norm(x_new - x))
        x = x_new
        n += 1
        if config.tol > 0:
            streak = streak + 1 if step_norm <= config.tol * (1.0 + float(np.linalg.norm(x))) else 0
            if streak >= 3:
                status = "converged"
                break

    v = [zi - x for zi in z_aux]
    x_final = z - sum(wi * vi for wi, vi in zip(w, v))
    if last_recorded != n:
        trace.append(n, problem.primal_objective(x_final), problem.dual_objective(v),
                     None, 1.0, 1.0)
    trace.status = status
    trace.iterations = n
    return Solution(x=x_final, v=v, iterations=n, converged=status == "converged",
                    status=status), trace


@dataclass
class QualificationReport:
    """Outcome of the sufficient-condition qualification check."""

    status: str  # "satisfied" or "unknown"
    rule: str | None = None
    detail: str = ""

    @property
    def satisfied(self):
        return self.status == "satisfied"


def check_qualification(problem, slater_point=None):
    """Sufficient-rule check of the constraint qualification.

    Rule (a): every g_i has full domain.  Rule (b): a user-supplied point
    maps strictly inside every domain.  When neither rule fires the status
    is "unknown" -- a violation is never claimed.
    """
    if all(t.fn.domain == "full" for t in problem.terms):
        return QualificationReport("satisfied", "full_domain",
                                   "every function has full domain")
    if slater_point is not None:
        xhat = as_vector(slater_point, problem.dim, "slater point")
        for i, t in enumerate(problem.terms):
            if t.fn.domain == "full":
                continue
            dom = t.fn.domain
            if dom is None:
                return QualificationReport("unknown", None,
                                           f"term {i} has no domain descriptor")
            y = t.op.apply(xhat) - t.shift
            margin = 1e-12 * (1.0 + float(np.linalg.norm(y)))
            if not dom.strictly_inside(y, margin):
                return QualificationReport(
                    "unknown", None, f"supplied point is not interior for term {i}")
        return QualificationReport("satisfied", "slater", "supplied point is interior everywhere")
    return QualificationReport("unknown", None, "no sufficient rule fired")


def make_decay_injector(dims, amplitude, exponent=2.0, seed=0):
    """Deterministic error injector with ||a_{i,n}|| = amplitude / (n+1)^exponent.

    ``dims`` gives the codomain dimension per term.  ``exponent > 1`` keeps
    the injected series summable, which is what the convergence guarantee
    tolerates.  Directions are unit vectors drawn from a seed derived from
    (seed, i, n), so the injector is pure.
    """
    if exponent <= 1:
        raise ValueError("exponent must exceed 1 for a summable error series")
    dims = [int(d) for d in dims]
    amplitude = float(amplitude)

    def injector(i, n):
        rng = np.random.default_rng((seed, i, n))
        direction = rng.standard_normal(dims[i])
        nd = np.linalg.norm(direction)
        if nd == 0.0:
            direction = np.zeros(dims[i])
            direction[0] = 1.0
            nd = 1.0
        return (amplitude / (n + 1.0) ** exponent) * (direction / nd)

    return injector


def problem_from_config(cfg, base_dir=None):
    """Build a problem from a config mapping.

    Schema: ``{"z": [...], "terms": [{"weight": w, "function": {...},
    "operator": {...}, "shift": [...]}]}``; ``shift`` defaults to zero.
    """
    z = as_vector(cfg["z"], name="z")
    terms = []
    for tc in cfg["terms"]:
        op = operator_from_config(tc["operator"], base_dir)
        shift = tc.get("shift")
        terms.append(Term(tc["weight"], function_from_config(tc["function"]), op,
                          np.zeros(op.dim_out) if shift is None else shift))
    return CompositeProxProblem(z, terms)


def load_problem(path):
    """Load a problem from a JSON file (paths inside resolve relative to it)."""
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    return problem_from_config(cfg, base_dir=os.path.dirname(os.path.abspath(path)))
