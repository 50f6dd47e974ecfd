"""Convex functions with exact proximity operators and conjugate-prox access.

Every catalog member provides an extended-real evaluation, the scaled
proximity map ``prox(gamma, y) = argmin g(x) + |x - y|^2 / (2 gamma)``, and
the conjugate prox.  Conjugate proxes route through the decomposition
``prox of (gamma g*) at v = v - gamma * prox(1/gamma, v/gamma)`` except where
the conjugate is the indicator of a dual-norm ball, in which case the direct
projection is used (and cross-checked against the decomposition in tests).
"""

from __future__ import annotations

import math

import numpy as np

from .linops import as_vector
from .sets import ConvexSet, set_from_config

__all__ = [
    "ProxFunction",
    "NormL1",
    "NormL2",
    "ZeroFunction",
    "ElasticNet",
    "SumOfNorms",
    "Indicator",
    "prox",
    "prox_conjugate",
    "elastic_net",
    "make_indicator",
    "function_from_config",
]


# Distances up to MEMBERSHIP_TOL * (1 + |y|) count as inside a set: floating-
# point projections land within roundoff of the boundary.
MEMBERSHIP_TOL = 1e-9


def _membership_tol(y):
    return MEMBERSHIP_TOL * (1.0 + float(np.linalg.norm(y)))


def _check_gamma(gamma):
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError("prox parameter gamma must be positive")
    return gamma


class ProxFunction:
    """A proper lower-semicontinuous convex function with an exact prox map.

    Attributes
    ----------
    kind : str
        Config-file name of the member.
    dim : int or None
        Required input dimension, or None when any dimension is accepted.
    domain : "full", ConvexSet, or None
        Effective domain: the whole space, a set descriptor, or unknown.
    """

    kind = "custom"
    dim = None
    domain = None

    def __call__(self, y):
        raise NotImplementedError

    def prox(self, gamma, y):
        raise NotImplementedError

    def prox_conjugate(self, gamma, v):
        gamma = _check_gamma(gamma)
        v = as_vector(v, self.dim, "point")
        return v - gamma * self.prox(1.0 / gamma, v / gamma)

    def conjugate_value(self, v):
        """Closed-form conjugate evaluation, or None when unavailable."""
        return None

    def to_config(self):
        raise NotImplementedError(f"{self.kind} is not config-serializable")


class NormL1(ProxFunction):
    """The l1 norm; prox is componentwise soft-thresholding."""

    kind = "norm1"
    domain = "full"

    def __call__(self, y):
        return float(np.sum(np.abs(as_vector(y))))

    def prox(self, gamma, y):
        gamma = _check_gamma(gamma)
        y = as_vector(y)
        return np.sign(y) * np.maximum(np.abs(y) - gamma, 0.0)

    def prox_conjugate(self, gamma, v):
        _check_gamma(gamma)
        return np.clip(as_vector(v), -1.0, 1.0)

    def conjugate_value(self, v):
        v = as_vector(v)
        return 0.0 if float(np.max(np.abs(v), initial=0.0)) <= 1.0 + _membership_tol(v) else math.inf

    def to_config(self):
        return {"kind": "norm1"}


class NormL2(ProxFunction):
    """The Euclidean norm; prox shrinks radially, conjugate prox is the unit-ball projection."""

    kind = "norm2"
    domain = "full"

    def __call__(self, y):
        return float(np.linalg.norm(as_vector(y)))

    def prox(self, gamma, y):
        gamma = _check_gamma(gamma)
        y = as_vector(y)
        n = float(np.linalg.norm(y))
        if n <= gamma:  # includes y = 0: prox continuous through the origin
            return np.zeros_like(y)
        return (1.0 - gamma / n) * y

    def prox_conjugate(self, gamma, v):
        _check_gamma(gamma)
        v = as_vector(v)
        return v / max(1.0, float(np.linalg.norm(v)))

    def conjugate_value(self, v):
        v = as_vector(v)
        return 0.0 if float(np.linalg.norm(v)) <= 1.0 + _membership_tol(v) else math.inf

    def to_config(self):
        return {"kind": "norm2"}


class ZeroFunction(ProxFunction):
    """The zero function; its conjugate is the indicator of the origin."""

    kind = "zero"
    domain = "full"

    def __call__(self, y):
        as_vector(y)
        return 0.0

    def prox(self, gamma, y):
        _check_gamma(gamma)
        return as_vector(y).copy()

    def prox_conjugate(self, gamma, v):
        _check_gamma(gamma)
        return np.zeros_like(as_vector(v))

    def conjugate_value(self, v):
        v = as_vector(v)
        return 0.0 if float(np.linalg.norm(v)) <= _membership_tol(v) else math.inf

    def to_config(self):
        return {"kind": "zero"}


class ElasticNet(ProxFunction):
    """Separable penalty  sum_k alpha |y_k| + beta y_k^2  with alpha, beta > 0."""

    kind = "elastic_net"
    domain = "full"

    def __init__(self, alpha, beta):
        self.alpha = float(alpha)
        self.beta = float(beta)
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("elastic net requires alpha > 0 and beta > 0")

    def __call__(self, y):
        y = as_vector(y)
        return float(self.alpha * np.sum(np.abs(y)) + self.beta * np.sum(y * y))

    def prox(self, gamma, y):
        gamma = _check_gamma(gamma)
        y = as_vector(y)
        soft = np.sign(y) * np.maximum(np.abs(y) - gamma * self.alpha, 0.0)
        return soft / (1.0 + 2.0 * gamma * self.beta)

    def conjugate_value(self, v):
        v = as_vector(v)
        excess = np.maximum(np.abs(v) - self.alpha, 0.0)
        return float(np.sum(excess * excess) / (4.0 * self.beta))

    def to_config(self):
        return {"kind": "elastic_net", "alpha": self.alpha, "beta": self.beta}


class SumOfNorms(ProxFunction):
    """Sum of Euclidean norms over contiguous component groups.

    Operates on vectors laid out as ``(group_size, groups)`` in row-major
    order: entry ``j * groups + t`` is component ``j`` of group ``t``.  The
    prox is a per-group block soft-threshold; the conjugate prox projects
    each group onto the unit ball.
    """

    kind = "sum_of_norms"
    domain = "full"

    def __init__(self, group_size, groups):
        self.group_size = int(group_size)
        self.groups = int(groups)
        if self.group_size < 1 or self.groups < 1:
            raise ValueError("group_size and groups must be positive")
        self.dim = self.group_size * self.groups

    def _grouped(self, y):
        return as_vector(y, self.dim, "point").reshape(self.group_size, self.groups)

    def __call__(self, y):
        g = self._grouped(y)
        return float(np.sum(np.sqrt(np.sum(g * g, axis=0))))

    def prox(self, gamma, y):
        gamma = _check_gamma(gamma)
        g = self._grouped(y)
        norms = np.sqrt(np.sum(g * g, axis=0))
        scale = np.zeros_like(norms)
        np.divide(norms - gamma, norms, out=scale, where=norms > gamma)
        return (g * scale).ravel()

    def prox_conjugate(self, gamma, v):
        _check_gamma(gamma)
        g = self._grouped(v)
        norms = np.sqrt(np.sum(g * g, axis=0))
        return (g / np.maximum(1.0, norms)).ravel()

    def conjugate_value(self, v):
        g = self._grouped(v)
        norms = np.sqrt(np.sum(g * g, axis=0))
        return 0.0 if float(np.max(norms, initial=0.0)) <= 1.0 + _membership_tol(v) else math.inf

    def to_config(self):
        return {"kind": "sum_of_norms", "group_size": self.group_size, "groups": self.groups}


class Indicator(ProxFunction):
    """Indicator of a closed convex set; prox is the metric projection."""

    def __init__(self, cset):
        if not isinstance(cset, ConvexSet):
            cset = set_from_config(cset)
        self.set = cset
        self.dim = cset.dim
        self.domain = cset
        self.kind = cset.kind

    def __call__(self, y):
        y = as_vector(y, self.dim, "point")
        return 0.0 if self.set.distance(y) <= _membership_tol(y) else math.inf

    def prox(self, gamma, y):
        _check_gamma(gamma)
        return np.asarray(self.set.project(as_vector(y, self.dim, "point")), dtype=float)

    def conjugate_value(self, v):
        return self.set.support(as_vector(v, self.dim, "direction"))

    def to_config(self):
        return self.set.to_config()


def prox(g, gamma, y):
    """Proximity operator of ``gamma * g`` at ``y``."""
    return g.prox(gamma, y)


def prox_conjugate(g, gamma, v):
    """Proximity operator of ``gamma * g*`` at ``v``."""
    return g.prox_conjugate(gamma, v)


def elastic_net(alpha, beta):
    """Elastic-net penalty with l1 weight ``alpha`` and quadratic weight ``beta``."""
    return ElasticNet(alpha, beta)


def make_indicator(cset):
    """Indicator function of a set descriptor (or its config mapping)."""
    return Indicator(cset)


def function_from_config(cfg):
    """Build a catalog function from a config mapping with a ``kind`` field."""
    kind = cfg.get("kind")
    if kind == "norm1":
        return NormL1()
    if kind == "norm2":
        return NormL2()
    if kind == "zero":
        return ZeroFunction()
    if kind == "elastic_net":
        return ElasticNet(cfg["alpha"], cfg["beta"])
    if kind == "sum_of_norms":
        return SumOfNorms(cfg["group_size"], cfg["groups"])
    if kind in ("ball", "box", "halfspace", "affine"):
        return Indicator(set_from_config(cfg))
    raise ValueError(f"unknown function kind: {kind!r}")
