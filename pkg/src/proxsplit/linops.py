"""Euclidean vectors and linear operators with adjoints and certified norm bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionMismatch",
    "OperatorNormError",
    "AdjointReport",
    "LinearOperator",
    "as_vector",
    "inner",
    "estimate_operator_norm",
    "check_adjoint",
    "load_matrix_csv",
    "operator_from_config",
]


class DimensionMismatch(ValueError):
    """Vector or operator dimensions are inconsistent."""


class OperatorNormError(RuntimeError):
    """Power iteration did not settle; caller must supply an explicit bound."""


def as_vector(x, dim=None, name="vector"):
    """Coerce ``x`` to a finite 1-D float array, checking its length when given."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != int(dim):
        raise DimensionMismatch(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def inner(x, y):
    """Euclidean scalar product of two same-shape arrays (flattened)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"inner: shapes {x.shape} and {y.shape} differ")
    return float(np.dot(x.ravel(), y.ravel()))


class LinearOperator:
    """A linear map between Euclidean spaces given by apply/adjoint callables.

    Parameters
    ----------
    dim_in, dim_out : int
        Dimensions of the domain and codomain.
    apply, adjoint : callable
        ``apply(x)`` maps a length-``dim_in`` array to length ``dim_out``;
        ``adjoint(u)`` is the transpose map.  Both must be pure.
    norm_bound : float, optional
        Known upper bound on the spectral norm.  When omitted it is
        estimated lazily by power iteration (inflated by a safety factor,
        so the stored bound may overestimate but never undercuts).
    """

    def __init__(self, dim_in, dim_out, apply, adjoint, norm_bound=None, kind="custom"):
        dim_in = int(dim_in)
        dim_out = int(dim_out)
        if dim_in < 1 or dim_out < 1:
            raise DimensionMismatch("operator dimensions must be positive")
        self.dim_in = dim_in
        self.dim_out = dim_out
        self._apply = apply
        self._adjoint = adjoint
        self._norm_bound = None if norm_bound is None else float(norm_bound)
        self.kind = kind

    def apply(self, x):
        x = as_vector(x, self.dim_in, "operator input")
        return as_vector(self._apply(x), self.dim_out, "operator output")

    __call__ = apply

    def adjoint(self, u):
        u = as_vector(u, self.dim_out, "adjoint input")
        return as_vector(self._adjoint(u), self.dim_in, "adjoint output")

    @property
    def norm_bound(self):
        """Certified upper bound on the spectral norm (lazily estimated)."""
        if self._norm_bound is None:
            self._norm_bound = estimate_operator_norm(self)
        return self._norm_bound

    def as_matrix(self):
        """Densify by applying to the standard basis (small operators only)."""
        cols = [self.apply(col) for col in np.eye(self.dim_in)]
        return np.stack(cols, axis=1)

    @classmethod
    def identity(cls, dim):
        return cls(dim, dim, lambda x: x, lambda u: u, norm_bound=1.0, kind="identity")

    @classmethod
    def diagonal(cls, entries):
        d = as_vector(entries, name="diagonal entries")
        bound = float(np.max(np.abs(d))) if d.size else 0.0
        return cls(d.size, d.size, lambda x: d * x, lambda u: d * u,
                   norm_bound=bound, kind="diagonal")

    @classmethod
    def scaled_identity(cls, dim, factor):
        return cls.diagonal(np.full(int(dim), float(factor)))

    @classmethod
    def from_matrix(cls, matrix, norm_bound=None):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        return cls(m.shape[1], m.shape[0], lambda x: m @ x, lambda u: m.T @ u,
                   norm_bound=norm_bound, kind="matrix")

    @classmethod
    def vstack(cls, ops):
        """Stack operators sharing a domain: x -> (op_1 x, ..., op_k x)."""
        ops = list(ops)
        if not ops:
            raise DimensionMismatch("vstack needs at least one block")
        dim_in = ops[0].dim_in
        if any(op.dim_in != dim_in for op in ops):
            raise DimensionMismatch("vstack blocks must share the input dimension")
        splits = np.cumsum([op.dim_out for op in ops])[:-1]

        def apply(x):
            return np.concatenate([op.apply(x) for op in ops])

        def adjoint(u):
            out = np.zeros(dim_in)
            for op, part in zip(ops, np.split(u, splits)):
                out += op.adjoint(part)
            return out

        known = [op._norm_bound for op in ops]
        bound = float(np.sqrt(sum(b * b for b in known))) if all(b is not None for b in known) else None
        return cls(dim_in, sum(op.dim_out for op in ops),
                   apply, adjoint, norm_bound=bound, kind="vstack")


def estimate_operator_norm(op, tol=1e-8, max_iter=10_000, seed=0, safety=1.01):
    """Upper bound on the spectral norm of ``op`` by power iteration.

    Iterates ``b <- L*(L b)`` from a seeded random start until the singular
    value estimate ``|L b|`` (with ``|b| = 1``) changes by less than ``tol``
    relative, then inflates by ``safety``.  The Rayleigh estimate approaches
    the true norm from below, so the inflated value is a genuine upper bound
    whenever the iteration has settled within ``safety - 1`` of the top
    singular value.  Overestimating is harmless for the step-size ranges
    derived from this bound; underestimating would invalidate them.

    Raises
    ------
    OperatorNormError
        If the estimate has not settled within ``max_iter`` sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(op.dim_in)
    nb = np.linalg.norm(b)
    if nb == 0.0:  # cannot happen with standard_normal, guards custom rngs
        b = np.ones(op.dim_in)
        nb = np.linalg.norm(b)
    b = b / nb

    sigma = 0.0
    retries = 0
    for _ in range(int(max_iter)):
        y = op.apply(b)
        s = float(np.linalg.norm(y))
        if s == 0.0:
            if retries >= 2:
                return 0.0
            retries += 1
            b = rng.standard_normal(op.dim_in)
            b = b / np.linalg.norm(b)
            continue
        if abs(s - sigma) <= tol * s:
            return float(safety) * s
        sigma = s
        w = op.adjoint(y)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise OperatorNormError("power iteration hit the kernel of the adjoint")
        b = w / nw
    raise OperatorNormError(f"operator norm estimate did not settle in {max_iter} iterations")


@dataclass
class AdjointReport:
    """Result of randomized adjoint-consistency probing."""

    max_discrepancy: float
    tol: float
    trials: int

    @property
    def passed(self):
        return self.max_discrepancy <= self.tol


def check_adjoint(op, trials=20, seed=0, tol=1e-10):
    """Probe ``<L x, u> = <x, L* u>`` on random pairs; report the worst case.

    The discrepancy is relative: ``|lhs - rhs| / max(1, |lhs|, |rhs|)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(trials)):
        x = rng.standard_normal(op.dim_in)
        u = rng.standard_normal(op.dim_out)
        lhs = inner(op.apply(x), u)
        rhs = inner(x, op.adjoint(u))
        rel = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
        worst = max(worst, rel)
    return AdjointReport(max_discrepancy=worst, tol=float(tol), trials=int(trials))


def load_matrix_csv(path):
    """Load a dense matrix from a header-free, row-major CSV file."""
    m = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{path}: matrix has non-finite entries")
    return m


def operator_from_config(cfg, base_dir=None):
    """Build an operator from a config mapping.

    Supported kinds: ``identity`` (dim), ``diagonal`` (entries), ``scale``
    (dim, factor), ``matrix`` (rows), ``csv`` (path, resolved against
    ``base_dir``), ``stack`` (blocks: list of configs).
    """
    kind = cfg.get("kind")
    if kind == "identity":
        return LinearOperator.identity(cfg["dim"])
    if kind == "diagonal":
        return LinearOperator.diagonal(cfg["entries"])
    if kind == "scale":
        return LinearOperator.scaled_identity(cfg["dim"], cfg["factor"])
    if kind == "matrix":
        return LinearOperator.from_matrix(cfg["rows"])
    if kind == "csv":
        path = cfg["path"]
        if base_dir is not None:
            import os

            path = os.path.join(base_dir, path)
        return LinearOperator.from_matrix(load_matrix_csv(path))
    if kind == "stack":
        return LinearOperator.vstack(operator_from_config(b, base_dir) for b in cfg["blocks"])
    raise ValueError(f"unknown operator kind: {kind!r}")
