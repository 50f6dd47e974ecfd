"""Closed convex set descriptors with exact projections, distances, and support values."""

from __future__ import annotations

import numpy as np

from .linops import as_vector

__all__ = [
    "InconsistentAffineSystem",
    "ConvexSet",
    "Ball",
    "Box",
    "Halfspace",
    "AffineSet",
    "set_from_config",
]

# Direction tolerance for support-function domain tests (halfspace/affine).
_SUPPORT_TOL = 1e-9

# Snap guard making projections exactly idempotent: a point within a few ulps
# of the set (e.g. the roundoff image of a previous projection) is returned
# unchanged instead of being re-corrected by another ulp.
_SNAP = 64.0 * np.finfo(float).eps


class InconsistentAffineSystem(ValueError):
    """The affine system Ax = b has no solution."""


class ConvexSet:
    """Base class for nonempty closed convex sets in R^dim."""

    kind = "abstract"

    @property
    def dim(self):
        raise NotImplementedError

    def project(self, y):
        """Nearest point of the set to ``y``."""
        raise NotImplementedError

    def distance(self, y):
        """Euclidean distance from ``y`` to the set."""
        raise NotImplementedError

    def contains(self, y, tol=0.0):
        return self.distance(y) <= tol

    def support(self, v):
        """Support value sup_{x in set} <x, v>, or None when not evaluable."""
        return None

    def interior_point(self):
        """Some point of the topological interior, or None if it is empty."""
        return None

    def strictly_inside(self, y, margin=0.0):
        """Whether ``y`` lies in the interior with clearance ``margin``."""
        return False

    def to_config(self):
        raise NotImplementedError


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius):
        self.center = as_vector(center, name="ball center")
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def project(self, y):
        y = as_vector(y, self.dim, "point")
        d = y - self.center
        nd = float(np.linalg.norm(d))
        if nd <= self.radius + _SNAP * (self.radius + nd + np.linalg.norm(self.center)):
            return y
        return self.center + (self.radius / nd) * d

    def distance(self, y):
        y = as_vector(y, self.dim, "point")
        return max(0.0, float(np.linalg.norm(y - self.center)) - self.radius)

    def support(self, v):
        v = as_vector(v, self.dim, "direction")
        return float(self.center @ v) + self.radius * float(np.linalg.norm(v))

    def interior_point(self):
        return self.center.copy()

    def strictly_inside(self, y, margin=0.0):
        return float(np.linalg.norm(as_vector(y, self.dim) - self.center)) < self.radius - margin

    def to_config(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lo, hi):
        self.lo = as_vector(lo, name="box lower bound")
        self.hi = as_vector(hi, self.lo.size, "box upper bound")
        if np.any(self.lo > self.hi):
            raise ValueError("box requires lo <= hi componentwise")

    @property
    def dim(self):
        return self.lo.size

    def project(self, y):
        return np.clip(as_vector(y, self.dim, "point"), self.lo, self.hi)

    def distance(self, y):
        y = as_vector(y, self.dim, "point")
        return float(np.linalg.norm(y - np.clip(y, self.lo, self.hi)))

    def support(self, v):
        v = as_vector(v, self.dim, "direction")
        return float(np.sum(np.where(v >= 0, self.hi * v, self.lo * v)))

    def interior_point(self):
        if np.all(self.lo < self.hi):
            return 0.5 * (self.lo + self.hi)
        return None

    def strictly_inside(self, y, margin=0.0):
        y = as_vector(y, self.dim)
        return bool(np.all(y > self.lo + margin) and np.all(y < self.hi - margin))

    def to_config(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Halfspace(ConvexSet):
    """The set {x : <normal, x> <= offset}."""

    kind = "halfspace"

    def __init__(self, normal, offset):
        self.normal = as_vector(normal, name="halfspace normal")
        if np.linalg.norm(self.normal) == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        self.offset = float(offset)
        self._nn = float(self.normal @ self.normal)

    @property
    def dim(self):
        return self.normal.size

    def project(self, y):
        y = as_vector(y, self.dim, "point")
        excess = float(self.normal @ y) - self.offset
        snap = _SNAP * (abs(self.offset) + float(np.linalg.norm(y)) * np.sqrt(self._nn))
        if excess <= snap:
            return y
        return y - (excess / self._nn) * self.normal

    def distance(self, y):
        y = as_vector(y, self.dim, "point")
        return max(0.0, float(self.normal @ y) - self.offset) / float(np.sqrt(self._nn))

    def support(self, v):
        # Finite only along the outward normal: v = t * normal with t >= 0.
        v = as_vector(v, self.dim, "direction")
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return 0.0
        t = float(self.normal @ v) / self._nn
        residual = np.linalg.norm(v - t * self.normal)
        if residual > _SUPPORT_TOL * nv or t < -_SUPPORT_TOL:
            return float("inf")
        return max(t, 0.0) * self.offset

    def interior_point(self):
        return (self.offset - 1.0) / self._nn * self.normal

    def strictly_inside(self, y, margin=0.0):
        y = as_vector(y, self.dim)
        return float(self.normal @ y) < self.offset - margin * float(np.sqrt(self._nn))

    def to_config(self):
        return {"kind": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}


class AffineSet(ConvexSet):
    """The solution set {x : Ax = b} of a consistent linear system."""

    kind = "affine"

    def __init__(self, matrix, rhs):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.rhs = as_vector(rhs, self.matrix.shape[0], "affine rhs")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("affine matrix has non-finite entries")
        self._pinv = np.linalg.pinv(self.matrix)
        self._point = self._pinv @ self.rhs
        residual = np.linalg.norm(self.matrix @ self._point - self.rhs)
        if residual > 1e-9 * (1.0 + np.linalg.norm(self.rhs)):
            raise InconsistentAffineSystem("affine system Ax = b has no solution")

    @property
    def dim(self):
        return self.matrix.shape[1]

    def project(self, y):
        y = as_vector(y, self.dim, "point")
        correction = self._pinv @ (self.matrix @ y - self.rhs)
        if float(np.linalg.norm(correction)) <= _SNAP * (1.0 + float(np.linalg.norm(y))):
            return y
        return y - correction

    def distance(self, y):
        y = as_vector(y, self.dim, "point")
        return float(np.linalg.norm(self._pinv @ (self.matrix @ y - self.rhs)))

    def support(self, v):
        # Finite only for v in the row space of A.
        v = as_vector(v, self.dim, "direction")
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return 0.0
        row_part = self.matrix.T @ (self._pinv.T @ v)
        if np.linalg.norm(v - row_part) > _SUPPORT_TOL * nv:
            return float("inf")
        return float(self._point @ v)

    def interior_point(self):
        return None  # empty interior unless the set is the whole space

    def strictly_inside(self, y, margin=0.0):
        return False

    def to_config(self):
        return {"kind": "affine", "matrix": self.matrix.tolist(), "rhs": self.rhs.tolist()}


_SET_KINDS = {
    "ball": lambda cfg: Ball(cfg["center"], cfg["radius"]),
    "box": lambda cfg: Box(cfg["lo"], cfg["hi"]),
    "halfspace": lambda cfg: Halfspace(cfg["normal"], cfg["offset"]),
    "affine": lambda cfg: AffineSet(cfg["matrix"], cfg["rhs"]),
}


def set_from_config(cfg):
    """Build a set descriptor from a config mapping with a ``kind`` field."""
    kind = cfg.get("kind")
    if kind not in _SET_KINDS:
        raise ValueError(f"unknown set kind: {kind!r}")
    return _SET_KINDS[kind](cfg)
