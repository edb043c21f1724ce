"""
Catalog of maximally monotone operators with exact resolvents.

Every operator exposes resolvent(γ, w) = J_{γA}(w) = (Id + γA)^{-1}(w). The
catalog is a pragmatic subset of the maximally monotone operators: each entry
has a closed-form (or direct-factorization) resolvent, so one evaluation
yields an exact graph point (a, (w - a)/γ).

Resolvents act along the last axis, so a batch of points of shape (N, d) is
evaluated in one call.
"""

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import scipy.linalg

from app.core.errors import NonFiniteError, ParameterError, SignatureError
from app.services.space import Vec, as_vec, check_finite


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ParameterError(f"Resolvent parameter must be positive and finite, got {gamma!r}")
    return gamma


def bound_vector(values, dim: Optional[int], name: str) -> np.ndarray:
    """Like as_vec but admits ±inf (box bounds)."""
    vec = np.atleast_1d(np.array(values, dtype=np.float64))
    if vec.ndim != 1:
        raise SignatureError(f"{name} must be one-dimensional")
    if dim is not None and vec.shape[0] != dim:
        raise SignatureError(f"{name} has dimension {vec.shape[0]}, expected {dim}")
    if np.any(np.isnan(vec)):
        raise NonFiniteError(f"{name} contains NaN")
    return vec


class MonotoneOp(ABC):
    """A maximally monotone operator on R^dim, known through its resolvent."""

    tag: str = ""

    def __init__(self, dim: int):
        if dim <= 0:
            raise SignatureError(f"Operator dimension must be positive, got {dim}")
        self.dim = dim

    @abstractmethod
    def _resolvent(self, gamma: float, w: np.ndarray) -> np.ndarray:
        pass

    def resolvent(self, gamma: float, w: np.ndarray) -> np.ndarray:
        """
        Evaluate J_{γA}(w).

        Args:
            gamma: Positive resolvent parameter
            w: Point of shape (dim,) or batch of shape (N, dim)

        Returns:
            Array with the same shape as w

        Raises:
            ParameterError: If gamma is not positive
            SignatureError: If w has the wrong trailing dimension
            NonFiniteError: If w or the result contains NaN or Inf
        """
        gamma = _check_gamma(gamma)
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 0 or w.shape[-1] != self.dim:
            raise SignatureError(
                f"{self.tag} operator acts on dimension {self.dim}, got shape {w.shape}"
            )
        check_finite(w, "resolvent input")
        out = self._resolvent(gamma, w)
        check_finite(out, f"{self.tag} resolvent output")
        return out

    def parameters(self) -> dict[str, Any]:
        return {}

    def descriptor(self) -> dict[str, Any]:
        return {"tag": self.tag, "dim": self.dim, **self.parameters()}

    def affine_form(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """(M, c) when the operator is x ↦ Mx + c, otherwise None."""
        return None

    def coordinate(self, index: int) -> Optional["MonotoneOp"]:
        """
        The operator acting on coordinate `index` alone, when this one splits
        coordinatewise as a product of scalar operators; otherwise None.
        """
        self._check_index(index)
        return self if self.dim == 1 else None

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.dim:
            raise SignatureError(f"Coordinate {index} out of range for dimension {self.dim}")


class ZeroOperator(MonotoneOp):
    tag = "zero"

    def _resolvent(self, gamma, w):
        return w.copy()

    def affine_form(self):
        return np.zeros((self.dim, self.dim)), np.zeros(self.dim)

    def coordinate(self, index):
        self._check_index(index)
        return ZeroOperator(1)


class AffineOperator(MonotoneOp):
    """
    x ↦ Mx + c with M monotone (M + Mᵀ positive semidefinite).

    The resolvent solves (I + γM) a = w - γc with an LU factorization cached
    per γ; the cache is guarded by a lock so concurrent solves stay pure.
    """

    tag = "affine"

    def __init__(self, matrix, offset=None):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise SignatureError(f"Affine operator needs a square matrix, got shape {matrix.shape}")
        check_finite(matrix, "affine matrix")
        super().__init__(matrix.shape[0])
        offset = np.zeros(self.dim) if offset is None else as_vec(offset, self.dim, "affine offset")

        sym = 0.5 * (matrix + matrix.T)
        smallest = float(np.linalg.eigvalsh(sym)[0])
        scale = max(1.0, float(np.abs(matrix).max()))
        if smallest < -1e-10 * scale:
            raise ParameterError(
                f"Affine operator is not monotone: symmetric part has eigenvalue {smallest:.3e}"
            )
        self.matrix = matrix
        self.offset = offset
        self._factors: dict[float, tuple] = {}
        self._lock = threading.Lock()

    def _factor(self, gamma: float):
        with self._lock:
            factors = self._factors.get(gamma)
            if factors is None:
                factors = scipy.linalg.lu_factor(np.eye(self.dim) + gamma * self.matrix)
                self._factors[gamma] = factors
            return factors

    def _resolvent(self, gamma, w):
        rhs = w - gamma * self.offset
        return scipy.linalg.lu_solve(self._factor(gamma), rhs.T).T

    def parameters(self):
        return {"matrix": self.matrix.tolist(), "offset": self.offset.tolist()}

    def affine_form(self):
        return self.matrix.copy(), self.offset.copy()

    def coordinate(self, index):
        self._check_index(index)
        if np.count_nonzero(self.matrix - np.diag(np.diag(self.matrix))):
            return None
        return AffineOperator([[self.matrix[index, index]]], [self.offset[index]])


class BoxNormalCone(MonotoneOp):
    """Normal cone to the box [lower, upper]; the resolvent is a clamp."""

    tag = "box_normal_cone"

    def __init__(self, lower, upper):
        lower = bound_vector(lower, None, "lower bound")
        upper = bound_vector(upper, lower.shape[0], "upper bound")
        if np.any(lower > upper):
            raise ParameterError("Box lower bound exceeds upper bound")
        degenerate = lower == upper
        if np.any(degenerate) and not np.all(degenerate):
            raise ParameterError(
                "Box must have nonempty interior or collapse to a single point"
            )
        super().__init__(lower.shape[0])
        self.lower = lower
        self.upper = upper

    def _resolvent(self, gamma, w):
        return np.clip(w, self.lower, self.upper)

    def parameters(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def coordinate(self, index):
        self._check_index(index)
        return BoxNormalCone([self.lower[index]], [self.upper[index]])


class AffineSubspaceNormalCone(MonotoneOp):
    """Normal cone to {x : Ex = e}; the resolvent is the affine projection."""

    tag = "affine_normal_cone"

    def __init__(self, matrix, rhs):
        matrix = np.atleast_2d(np.array(matrix, dtype=np.float64))
        check_finite(matrix, "constraint matrix")
        rhs = as_vec(rhs, matrix.shape[0], "constraint right-hand side")
        super().__init__(matrix.shape[1])
        pinv = scipy.linalg.pinv(matrix)
        if np.linalg.norm(matrix @ (pinv @ rhs) - rhs) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
            raise ParameterError("Affine constraint set {x : Ex = e} is empty")
        self.matrix = matrix
        self.rhs = rhs
        self._pinv = pinv

    def _resolvent(self, gamma, w):
        residual = w @ self.matrix.T - self.rhs
        return w - residual @ self._pinv.T

    def parameters(self):
        return {"matrix": self.matrix.tolist(), "rhs": self.rhs.tolist()}


class L1Subdifferential(MonotoneOp):
    """∂(λ‖·‖₁); the resolvent is soft thresholding at γλ."""

    tag = "l1"

    def __init__(self, dim: int, weight: float = 1.0):
        super().__init__(dim)
        if not np.isfinite(weight) or weight < 0.0:
            raise ParameterError(f"l1 weight must be nonnegative, got {weight!r}")
        self.weight = float(weight)

    def _resolvent(self, gamma, w):
        return np.sign(w) * np.maximum(np.abs(w) - gamma * self.weight, 0.0)

    def parameters(self):
        return {"weight": self.weight}

    def coordinate(self, index):
        self._check_index(index)
        return L1Subdifferential(1, self.weight)


class SquaredDistanceSubdifferential(MonotoneOp):
    """∂((1/2)‖· - p‖²) = Id - p."""

    tag = "squared_distance"

    def __init__(self, anchor):
        anchor = as_vec(anchor, name="anchor")
        super().__init__(anchor.shape[0])
        self.anchor = anchor

    def _resolvent(self, gamma, w):
        return (w + gamma * self.anchor) / (1.0 + gamma)

    def parameters(self):
        return {"anchor": self.anchor.tolist()}

    def affine_form(self):
        return np.eye(self.dim), -self.anchor

    def coordinate(self, index):
        self._check_index(index)
        return SquaredDistanceSubdifferential([self.anchor[index]])


class BallNormalCone(MonotoneOp):
    """Normal cone to a closed Euclidean ball; the resolvent is the radial projection."""

    tag = "ball_normal_cone"

    def __init__(self, center, radius: float):
        center = as_vec(center, name="ball center")
        if not np.isfinite(radius) or radius <= 0.0:
            raise ParameterError(f"Ball radius must be positive, got {radius!r}")
        super().__init__(center.shape[0])
        self.center = center
        self.radius = float(radius)

    def _resolvent(self, gamma, w):
        offset = w - self.center
        dist = np.linalg.norm(offset, axis=-1, keepdims=True)
        scale = np.where(dist > self.radius, self.radius / np.where(dist > 0, dist, 1.0), 1.0)
        return self.center + offset * scale

    def parameters(self):
        return {"center": self.center.tolist(), "radius": self.radius}


class ScaledIdentityOperator(MonotoneOp):
    """
    x ↦ ρx with ρ > 0.

    Strictly monotone with single-valued inverse and S⁻¹0 = {0}: the kernel
    used to relax inconsistent common-zero problems.
    """

    tag = "scaled_identity"

    def __init__(self, dim: int, rho: float = 1.0):
        super().__init__(dim)
        if not np.isfinite(rho) or rho <= 0.0:
            raise ParameterError(f"Kernel scale must be positive, got {rho!r}")
        self.rho = float(rho)

    def _resolvent(self, gamma, w):
        return w / (1.0 + gamma * self.rho)

    def parameters(self):
        return {"rho": self.rho}

    def affine_form(self):
        return self.rho * np.eye(self.dim), np.zeros(self.dim)

    def coordinate(self, index):
        self._check_index(index)
        return ScaledIdentityOperator(1, self.rho)


class ShiftedOperator(MonotoneOp):
    """
    x ↦ A(x - s) + t.

    J_{γ(A(·-s)+t)}(w) = s + J_{γA}(w - γt - s).
    """

    tag = "shifted"

    def __init__(self, base: MonotoneOp, shift=None, offset=None):
        super().__init__(base.dim)
        self.base = base
        self.shift = np.zeros(base.dim) if shift is None else as_vec(shift, base.dim, "shift")
        self.offset = np.zeros(base.dim) if offset is None else as_vec(offset, base.dim, "offset")

    def _resolvent(self, gamma, w):
        return self.shift + self.base.resolvent(gamma, w - gamma * self.offset - self.shift)

    def parameters(self):
        return {
            "base": self.base.descriptor(),
            "shift": self.shift.tolist(),
            "offset": self.offset.tolist(),
        }

    def affine_form(self):
        form = self.base.affine_form()
        if form is None:
            return None
        matrix, offset = form
        return matrix, offset - matrix @ self.shift + self.offset

    def coordinate(self, index):
        base = self.base.coordinate(index)
        if base is None:
            return None
        return ShiftedOperator(base, [self.shift[index]], [self.offset[index]])


@dataclass(frozen=True)
class GraphPoint:
    """A pair (a, a*) with a* ∈ Aa."""

    a: Vec
    a_star: Vec


def resolvent(A: MonotoneOp, gamma: float, w: Vec) -> Vec:
    return A.resolvent(gamma, w)


def graph_point(A: MonotoneOp, gamma: float, w: Vec) -> GraphPoint:
    """
    Build a certified graph point from one resolvent evaluation.

    a = J_{γA}(w) implies a* = (w - a)/γ ∈ Aa.
    """
    a = A.resolvent(gamma, w)
    return GraphPoint(a=a, a_star=(np.asarray(w, dtype=np.float64) - a) / gamma)


def graph_residual(A: MonotoneOp, gamma: float, p: GraphPoint) -> float:
    """‖a - J_{γA}(a + γa*)‖, zero exactly when (a, a*) ∈ gra A."""
    _check_gamma(gamma)
    back = A.resolvent(gamma, p.a + gamma * p.a_star)
    return float(np.linalg.norm(p.a - back))


def inverse_resolvent(A: MonotoneOp, gamma: float, w: Vec) -> Vec:
    """J_{γA⁻¹}(w) = w - γ J_{γ⁻¹A}(w/γ) (Moreau decomposition)."""
    gamma = _check_gamma(gamma)
    w = np.asarray(w, dtype=np.float64)
    return w - gamma * A.resolvent(1.0 / gamma, w / gamma)


def inverse_graph_residual(A: MonotoneOp, gamma: float, p: GraphPoint) -> float:
    """Graph residual of (a, a*) with respect to A⁻¹, i.e. a ∈ A a*."""
    _check_gamma(gamma)
    back = inverse_resolvent(A, gamma, p.a + gamma * p.a_star)
    return float(np.linalg.norm(p.a - back))
