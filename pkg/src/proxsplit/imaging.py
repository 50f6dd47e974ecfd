"""Discrete image calculus and the dual-splitting image recovery solver.

Images are 2-D float arrays (row-major pixels); dual fields carry one
2-vector per pixel as an array of shape (2, height, width) with the
horizontal component first.  The discrete gradient uses forward differences
with replicate boundary and the divergence is its exact negative adjoint,
so the discrete operator-norm bound (about sqrt(8)) is estimated rather
than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functions import NormL1, NormL2, SumOfNorms, ZeroFunction
from .linops import LinearOperator, as_vector
from .solver import (
    CompositeProxProblem,
    SolverConfig,
    Term,
    Trace,
    _Schedules,
    check_weights,
)

__all__ = [
    "forward_gradient",
    "backward_divergence",
    "tv",
    "project_disk_field",
    "gradient_operator",
    "OrthonormalBasisOp",
    "identity_basis",
    "haar_basis",
    "MeasurementModel",
    "degrade",
    "block_average_operator",
    "make_noise",
    "recovery_problem",
    "recovery_objective",
    "recover_image",
]


def _as_image(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image has non-finite entries")
    return x


def forward_gradient(x):
    """Forward-difference gradient with replicate boundary (zero at the far edge)."""
    x = _as_image(x)
    g = np.zeros((2,) + x.shape)
    g[0][:, :-1] = x[:, 1:] - x[:, :-1]
    g[1][:-1, :] = x[1:, :] - x[:-1, :]
    return g


def backward_divergence(field):
    """Exact negative adjoint of :func:`forward_gradient`."""
    field = np.asarray(field, dtype=float)
    if field.ndim != 3 or field.shape[0] != 2:
        raise ValueError(f"dual field must have shape (2, h, w), got {field.shape}")
    p_h, p_v = field[0], field[1]
    out = np.zeros(p_h.shape)
    out[:, :-1] += p_h[:, :-1]
    out[:, 1:] -= p_h[:, :-1]
    out[:-1, :] += p_v[:-1, :]
    out[1:, :] -= p_v[:-1, :]
    return out


def tv(x):
    """Total variation: sum over pixels of the Euclidean norm of the local gradient."""
    g = forward_gradient(x)
    return float(np.sum(np.sqrt(g[0] * g[0] + g[1] * g[1])))


def project_disk_field(field):
    """Per-pixel projection of a dual field onto the unit disk."""
    field = np.asarray(field, dtype=float)
    norms = np.sqrt(field[0] * field[0] + field[1] * field[1])
    return field / np.maximum(1.0, norms)


def gradient_operator(shape):
    """The discrete gradient as a flat operator (h*w -> 2*h*w)."""
    h, w = int(shape[0]), int(shape[1])
    n = h * w

    def apply(x):
        return forward_gradient(x.reshape(h, w)).ravel()

    def adjoint(u):
        return -backward_divergence(u.reshape(2, h, w)).ravel()

    bound = 0.0 if n == 1 else None  # single pixel: no neighbors, zero operator
    return LinearOperator(n, 2 * n, apply, adjoint, norm_bound=bound, kind="gradient")


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def _haar_last_axis(a, inverse=False):
    # Full orthonormal 1-D transform along the last axis (power-of-two length).
    out = np.array(a, dtype=float)
    n = out.shape[-1]
    s2 = math.sqrt(2.0)
    if not inverse:
        while n > 1:
            half = n // 2
            ev = out[..., 0:n:2].copy()
            od = out[..., 1:n:2].copy()
            out[..., :half] = (ev + od) / s2
            out[..., half:n] = (ev - od) / s2
            n = half
    else:
        size = 1
        while size < n:
            m2 = 2 * size
            s = out[..., :size].copy()
            d = out[..., size:m2].copy()
            out[..., 0:m2:2] = (s + d) / s2
            out[..., 1:m2:2] = (s - d) / s2
            size = m2
    return out


def haar2_forward(img):
    """Separable orthonormal Haar transform of a power-of-two image."""
    t = _haar_last_axis(img)
    return np.swapaxes(_haar_last_axis(np.swapaxes(t, 0, 1)), 0, 1)


def haar2_inverse(coef):
    t = np.swapaxes(_haar_last_axis(np.swapaxes(coef, 0, 1), inverse=True), 0, 1)
    return _haar_last_axis(t, inverse=True)


@dataclass
class OrthonormalBasisOp:
    """Analysis/synthesis pair of an orthonormal basis on flattened images."""

    analysis: LinearOperator
    synthesis: LinearOperator
    name: str = "basis"


def identity_basis(shape):
    """The pixel basis: analysis and synthesis are the identity."""
    n = int(shape[0]) * int(shape[1])
    return OrthonormalBasisOp(LinearOperator.identity(n), LinearOperator.identity(n),
                              name="identity")


def haar_basis(shape):
    """Orthonormal 2-D Haar basis; both grid sides must be powers of two."""
    h, w = int(shape[0]), int(shape[1])
    if not (_is_pow2(h) and _is_pow2(w)):
        raise ValueError(f"haar basis needs power-of-two grid sides, got {h}x{w}")
    n = h * w

    def analyze(x):
        return haar2_forward(x.reshape(h, w)).ravel()

    def synthesize(c):
        return haar2_inverse(c.reshape(h, w)).ravel()

    analysis = LinearOperator(n, n, analyze, synthesize, norm_bound=1.0, kind="haar")
    synthesis = LinearOperator(n, n, synthesize, analyze, norm_bound=1.0, kind="haar_inv")
    return OrthonormalBasisOp(analysis, synthesis, name="haar")


@dataclass
class MeasurementModel:
    """Degraded observations r_i = T_i x + s_i of an image of a known shape."""

    operators: list
    data: list
    image_shape: tuple

    def __post_init__(self):
        h, w = self.image_shape
        self.image_shape = (int(h), int(w))
        n = self.image_shape[0] * self.image_shape[1]
        if len(self.operators) != len(self.data):
            raise ValueError("one data vector per operator is required")
        if not self.operators:
            raise ValueError("at least one measurement is required")
        self.data = [as_vector(r, op.dim_out, "measurement")
                     for op, r in zip(self.operators, self.data)]
        for op in self.operators:
            if op.dim_in != n:
                raise ValueError(f"operator input {op.dim_in} does not match image size {n}")

    @property
    def p(self):
        return len(self.operators)


def degrade(x, op, noise):
    """Apply a data-formation operator and add noise: T x + s."""
    x = np.asarray(x, dtype=float)
    out = op.apply(x.ravel())
    return out + as_vector(noise, out.size, "noise")


def block_average_operator(shape, factor):
    """Downsampling by block means; adjoint spreads values back uniformly."""
    h, w = int(shape[0]), int(shape[1])
    f = int(factor)
    if f < 1 or h % f or w % f:
        raise ValueError(f"factor {f} must divide both grid sides {h}x{w}")
    hb, wb = h // f, w // f

    def apply(x):
        return x.reshape(hb, f, wb, f).mean(axis=(1, 3)).ravel()

    def adjoint(u):
        blocks = u.reshape(hb, wb) / (f * f)
        return np.repeat(np.repeat(blocks, f, axis=0), f, axis=1).ravel()

    return LinearOperator(h * w, hb * wb, apply, adjoint, norm_bound=1.0 / f,
                          kind="block_average")


def make_noise(shape, amplitude, seed=0):
    """Seeded Gaussian noise image of the given shape."""
    rng = np.random.default_rng(seed)
    return float(amplitude) * rng.standard_normal(tuple(int(s) for s in shape))


def _tv_term_parts(shape):
    # Single-pixel grids have a zero gradient operator; the variation term is
    # then identically zero and is carried as the zero function instead, which
    # keeps the weights intact and every operator nonzero.
    grad_op = gradient_operator(shape)
    n = int(shape[0]) * int(shape[1])
    if n == 1:
        return ZeroFunction(), LinearOperator.identity(1), True
    return SumOfNorms(2, n), grad_op, False


def recovery_problem(model, basis, weights):
    """Composite-prox encoding of the recovery objective (z = 0).

    Terms, in order: one Euclidean-norm data term per measurement, the l1
    term on basis coefficients, and the total-variation term (sum of
    per-pixel gradient norms).  The quadratic half-norm of the coefficients
    equals the prox term |x - 0|^2 / 2 by Parseval, so it needs no term.
    """
    w = check_weights(weights, model.p + 2)
    h, wd = model.image_shape
    n = h * wd
    tv_fn, tv_op, _ = _tv_term_parts((h, wd))
    terms = [Term(w[i], NormL2(), model.operators[i], model.data[i])
             for i in range(model.p)]
    terms.append(Term(w[model.p], NormL1(), basis.analysis, np.zeros(n)))
    terms.append(Term(w[model.p + 1], tv_fn, tv_op, np.zeros(tv_op.dim_out)))
    return CompositeProxProblem(np.zeros(n), terms)


def recovery_objective(model, basis, weights, x):
    """Recovery objective at an image: data norms + elastic coefficients + TV."""
    w = check_weights(weights, model.p + 2)
    x = _as_image(x)
    if x.shape != model.image_shape:
        raise ValueError(f"image shape {x.shape} does not match model {model.image_shape}")
    flat = x.ravel()
    total = 0.0
    for i in range(model.p):
        total += w[i] * float(np.linalg.norm(model.operators[i].apply(flat) - model.data[i]))
    coef = basis.analysis.apply(flat)
    total += w[model.p] * float(np.sum(np.abs(coef))) + 0.5 * float(np.sum(coef * coef))
    total += w[model.p + 1] * tv(x)
    return total


def recover_image(model, basis, weights, config=None, *, callback=None):
    """Recover an image from noisy measurements by the dual splitting iteration.

    Minimizes  sum_i w_i |T_i x - r_i| + sum_k (w_{p+1} |c_k| + c_k^2 / 2)
    + w_{p+2} tv(x)  over images x, where c = analysis(x).  Every dual
    update is a simple projection: measurement duals onto unit balls, the
    coefficient dual onto [-1, 1] componentwise, and the gradient dual onto
    per-pixel unit disks.  Produces the same iterates as ``solve`` on
    :func:`recovery_problem`.

    Returns
    -------
    (image, Trace)
    """
    config = config or SolverConfig()
    if config.error_injector is not None:
        raise ValueError("recover_image runs exact steps; inject errors through "
                         "solve() on recovery_problem() instead")
    w = check_weights(weights, model.p + 2)
    h, wd = model.image_shape
    n = h * wd
    p = model.p
    _, tv_op, tv_degenerate = _tv_term_parts((h, wd))

    bounds = [op.norm_bound for op in model.operators]
    bounds += [1.0, 1.0 if tv_degenerate else tv_op.norm_bound]
    if min(bounds) <= 0:
        raise ValueError("every measurement operator must be nonzero")
    sched = _Schedules(1.0 / max(bounds) ** 2, config)

    v_data = [np.zeros(op.dim_out) for op in model.operators]
    nu = np.zeros(n)
    fld = np.zeros((2, h, wd))

    def primal_point():
        acc = np.zeros(n)
        for i in range(p):
            acc += w[i] * model.operators[i].adjoint(v_data[i])
        acc += w[p] * basis.synthesis.apply(nu)
        if not tv_degenerate:
            acc += w[p + 1] * (-backward_divergence(fld)).ravel()
        return -acc

    def primal_objective(flat, img):
        total = 0.5 * float(np.sum(flat * flat))
        for i in range(p):
            total += w[i] * float(np.linalg.norm(model.operators[i].apply(flat) - model.data[i]))
        total += w[p] * float(np.sum(np.abs(basis.analysis.apply(flat))))
        total += w[p + 1] * tv(img)
        return total

    def membership_tol(vec):
        return 1e-9 * (1.0 + float(np.linalg.norm(vec)))

    def dual_objective(flat):
        total = 0.5 * float(np.sum(flat * flat))
        for i in range(p):
            if float(np.linalg.norm(v_data[i])) > 1.0 + membership_tol(v_data[i]):
                return math.inf
            total += w[i] * float(v_data[i] @ model.data[i])
        if float(np.max(np.abs(nu), initial=0.0)) > 1.0 + membership_tol(nu):
            return math.inf
        if not tv_degenerate:
            norms = np.sqrt(fld[0] * fld[0] + fld[1] * fld[1])
            if float(np.max(norms, initial=0.0)) > 1.0 + membership_tol(fld.ravel()):
                return math.inf
        return total

    trace = Trace()
    gap_threshold = 0.5 * config.tol * config.tol if config.tol > 0 else -1.0
    x = primal_point()
    x_prev = None
    streak = 0
    status = "max_iter"
    n_iter = 0
    last_recorded = -1
    while True:
        img = x.reshape(h, wd)
        step_norm = None if x_prev is None else float(np.linalg.norm(x - x_prev))
        gamma_n = sched.gamma(n_iter)
        lam_n = sched.lam(n_iter)
        record = config.trace_every > 0 and n_iter % config.trace_every == 0
        if record:
            primal = primal_objective(x, img)
            dual = dual_objective(x)
            trace.append(n_iter, primal, dual, step_norm, gamma_n, lam_n)
            last_recorded = n_iter
        if callback is not None:
            callback(n_iter, img.copy())
        if config.tol > 0 and step_norm is not None:
            streak = streak + 1 if step_norm <= config.tol * (1.0 + float(np.linalg.norm(x))) else 0
            if streak >= 3:
                status = "converged"
                break
            if record and math.isfinite(dual):
                # duality offset |z|^2 / 2 vanishes at z = 0; subtract the
                # membership-tolerance fuzz of the dual indicators
                x_norm = float(np.linalg.norm(x))
                fuzz = 0.0
                for i in range(p):
                    fuzz += w[i] * (bounds[i] * x_norm + float(np.linalg.norm(model.data[i]))) \
                        * 1e-9 * (1.0 + float(np.linalg.norm(v_data[i])))
                fuzz += w[p] * x_norm * 1e-9 * (1.0 + float(np.linalg.norm(nu)))
                if not tv_degenerate:
                    fuzz += w[p + 1] * bounds[-1] * x_norm * 1e-9 * (1.0 + float(np.linalg.norm(fld)))
                if primal + dual <= gap_threshold - fuzz:
                    status = "converged"
                    break
        if n_iter >= config.max_iter:
            break
        for i in range(p):
            u = v_data[i] + gamma_n * (model.operators[i].apply(x) - model.data[i])
            v_data[i] = v_data[i] + lam_n * (u / max(1.0, float(np.linalg.norm(u))) - v_data[i])
        u = nu + gamma_n * basis.analysis.apply(x)
        nu = nu + lam_n * (np.clip(u, -1.0, 1.0) - nu)
        if not tv_degenerate:
            uf = fld + gamma_n * forward_gradient(img)
            fld = fld + lam_n * (project_disk_field(uf) - fld)
        x_prev = x
        x = primal_point()
        n_iter += 1

    if last_recorded != n_iter:
        img = x.reshape(h, wd)
        trace.append(n_iter, primal_objective(x, img), dual_objective(x),
                     None if x_prev is None else float(np.linalg.norm(x - x_prev)),
                     sched.gamma(n_iter), sched.lam(n_iter))
    trace.status = status
    trace.iterations = n_iter
    return x.reshape(h, wd), trace
