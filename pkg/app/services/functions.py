"""
Prox-capable convex functions for the minimization front end.

Each function knows its value, its Fenchel conjugate and its subdifferential
as a catalog operator, so prox_{γf} is the resolvent of ∂f.
"""

import math
from abc import ABC, abstractmethod
from typing import Any, Optional

import numpy as np

from app.core.config import config
from app.services.operators import (
    BallNormalCone,
    BoxNormalCone,
    L1Subdifferential,
    MonotoneOp,
    SquaredDistanceSubdifferential,
    ZeroOperator,
    bound_vector,
)
from app.services.space import Vec, as_vec


def _fsum_dot(u: np.ndarray, v: np.ndarray) -> float:
    return math.fsum((u * v).tolist())


class ProxFunction(ABC):
    """A proper lower semicontinuous convex function on R^dim."""

    tag: str = ""

    def __init__(self, dim: int, tol: Optional[float] = None):
        self.dim = dim
        self.tol = config.membership_tol if tol is None else tol

    @abstractmethod
    def value(self, x: Vec) -> float:
        pass

    @abstractmethod
    def conjugate(self, u: Vec) -> float:
        pass

    @abstractmethod
    def subdifferential(self) -> MonotoneOp:
        pass

    def prox(self, gamma: float, w: Vec) -> Vec:
        return self.subdifferential().resolvent(gamma, w)

    def parameters(self) -> dict[str, Any]:
        return {}

    def descriptor(self) -> dict[str, Any]:
        return {"tag": self.tag, "dim": self.dim, **self.parameters()}


class ZeroFunction(ProxFunction):
    tag = "zero"

    def value(self, x):
        return 0.0

    def conjugate(self, u):
        u = as_vec(u, self.dim)
        return 0.0 if float(np.max(np.abs(u))) <= self.tol else math.inf

    def subdifferential(self):
        return ZeroOperator(self.dim)


class BoxIndicator(ProxFunction):
    tag = "box_indicator"

    def __init__(self, lower, upper, tol: Optional[float] = None):
        lower = bound_vector(lower, None, "lower bound")
        upper = bound_vector(upper, lower.shape[0], "upper bound")
        super().__init__(lower.shape[0], tol)
        self.lower = lower
        self.upper = upper
        self._operator = BoxNormalCone(lower, upper)

    def value(self, x):
        x = as_vec(x, self.dim)
        inside = np.all(x >= self.lower - self.tol) and np.all(x <= self.upper + self.tol)
        return 0.0 if inside else math.inf

    def conjugate(self, u):
        # Support function of the box
        u = as_vec(u, self.dim)
        terms = []
        for uj, lj, hj in zip(u.tolist(), self.lower.tolist(), self.upper.tolist()):
            if uj > 0.0:
                terms.append(uj * hj)
            elif uj < 0.0:
                terms.append(uj * lj)
        if any(math.isinf(term) for term in terms):
            return math.inf
        return math.fsum(terms)

    def subdifferential(self):
        return self._operator

    def parameters(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


class BallIndicator(ProxFunction):
    tag = "ball_indicator"

    def __init__(self, center, radius: float, tol: Optional[float] = None):
        center = as_vec(center, name="ball center")
        super().__init__(center.shape[0], tol)
        self.center = center
        self.radius = float(radius)
        self._operator = BallNormalCone(center, radius)

    def value(self, x):
        x = as_vec(x, self.dim)
        return 0.0 if float(np.linalg.norm(x - self.center)) <= self.radius + self.tol else math.inf

    def conjugate(self, u):
        u = as_vec(u, self.dim)
        return _fsum_dot(self.center, u) + self.radius * float(np.linalg.norm(u))

    def subdifferential(self):
        return self._operator

    def parameters(self):
        return {"center": self.center.tolist(), "radius": self.radius}


class L1Norm(ProxFunction):
    """x ↦ λ‖x‖₁; the conjugate is the indicator of the ℓ∞ ball of radius λ."""

    tag = "l1"

    def __init__(self, dim: int, weight: float = 1.0, tol: Optional[float] = None):
        super().__init__(dim, tol)
        self._operator = L1Subdifferential(dim, weight)
        self.weight = self._operator.weight

    def value(self, x):
        x = as_vec(x, self.dim)
        return self.weight * math.fsum(np.abs(x).tolist())

    def conjugate(self, u):
        u = as_vec(u, self.dim)
        return 0.0 if float(np.max(np.abs(u))) <= self.weight + self.tol else math.inf

    def subdifferential(self):
        return self._operator

    def parameters(self):
        return {"weight": self.weight}


class SquaredDistance(ProxFunction):
    """x ↦ (1/2)‖x − p‖²."""

    tag = "squared_distance"

    def __init__(self, anchor, tol: Optional[float] = None):
        anchor = as_vec(anchor, name="anchor")
        super().__init__(anchor.shape[0], tol)
        self.anchor = anchor
        self._operator = SquaredDistanceSubdifferential(anchor)

    def value(self, x):
        d = as_vec(x, self.dim) - self.anchor
        return 0.5 * _fsum_dot(d, d)

    def conjugate(self, u):
        u = as_vec(u, self.dim)
        return 0.5 * _fsum_dot(u, u) + _fsum_dot(u, self.anchor)

    def subdifferential(self):
        return self._operator

    def parameters(self):
        return {"anchor": self.anchor.tolist()}
