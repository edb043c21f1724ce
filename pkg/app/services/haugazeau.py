"""
Two-half-space projector and the outer-approximation loop.

Given an anchor x, a current point y and a candidate z, the half-spaces are

    H(x, y) = {h : ⟨h - y, x - y⟩ ≤ 0}

and Q(x, y, z) is the projection of x onto H(x, y) ∩ H(y, z). The loop
iterates x_{n+1} = Q(x0, x_n, x_{n+1/2}) where x_{n+1/2} comes from an
oracle that keeps the target set inside H(x_n, x_{n+1/2}). Every iterate is
then the projection of x0 onto a set containing the target, so the distance
to x0 grows monotonically towards the distance to the target's projection.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from app.core.config import config
from app.core.errors import EmptyIntersectionError, SignatureError
from app.services.space import Point, flatten, inner, rebuild, signature_of

logger = logging.getLogger(__name__)

_TINY = float(np.finfo(np.float64).tiny)


@dataclass(frozen=True)
class QScalars:
    """⟨x - y, y - z⟩, ‖x - y‖², ‖y - z‖² and the Gram determinant."""

    q_chi: float
    q_mu: float
    q_nu: float
    q_rho: float


@dataclass(frozen=True)
class HalfSpace:
    anchor_x: Point
    anchor_y: Point

    @property
    def is_whole_space(self) -> bool:
        return not np.any(flatten(self.anchor_x) != flatten(self.anchor_y))


def _flat_triplet(*points: Point) -> list[np.ndarray]:
    signatures = {signature_of(p) for p in points}
    if len(signatures) != 1:
        raise SignatureError(f"Points live in different spaces: {sorted(s.dims for s in signatures)}")
    return [flatten(p) for p in points]


def halfspace_contains(hs: HalfSpace, h: Point, tol: float = 0.0) -> bool:
    """True iff ⟨h - y, x - y⟩ ≤ tol."""
    x, y, hv = _flat_triplet(hs.anchor_x, hs.anchor_y, h)
    return inner(hv - y, x - y) <= tol


def q_scalars(x: Point, y: Point, z: Point, cs_clamp: Optional[float] = None) -> QScalars:
    """
    Scalars classifying the triplet (x, y, z).

    q_rho is nonnegative by Cauchy-Schwarz; rounding can push it slightly
    below zero, and values above -cs_clamp·q_mu·q_nu are clamped to 0.
    """
    cs_clamp = config.cs_clamp if cs_clamp is None else cs_clamp
    xf, yf, zf = _flat_triplet(x, y, z)
    d_xy = xf - yf
    d_yz = yf - zf
    chi = inner(d_xy, d_yz)
    mu = inner(d_xy, d_xy)
    nu = inner(d_yz, d_yz)
    rho = mu * nu - chi * chi
    if rho < 0.0 and rho >= -cs_clamp * mu * nu:
        rho = 0.0
    return QScalars(q_chi=chi, q_mu=mu, q_nu=nu, q_rho=rho)


def q_projection(
    x: Point,
    y: Point,
    z: Point,
    rho_tol: Optional[float] = None,
    cs_clamp: Optional[float] = None,
) -> tuple[Point, QScalars]:
    """
    Q(x, y, z) together with the scalars that selected its branch.

    Returns:
        (point, scalars); the point has the representation of x

    Raises:
        EmptyIntersectionError: If H(x, y) ∩ H(y, z) is empty
    """
    rho_tol = config.rho_tol if rho_tol is None else rho_tol
    s = q_scalars(x, y, z, cs_clamp)
    xf, yf, zf = flatten(x), flatten(y), flatten(z)

    rho_is_zero = s.q_rho <= rho_tol * max(s.q_mu * s.q_nu, _TINY)
    if rho_is_zero:
        if s.q_chi < 0.0:
            raise EmptyIntersectionError(s)
        result = np.array(zf, dtype=np.float64)
    elif s.q_chi * s.q_nu >= s.q_rho:
        result = xf + (1.0 + s.q_chi / s.q_nu) * (zf - yf)
    else:
        result = yf + (s.q_nu / s.q_rho) * (s.q_chi * (xf - yf) + s.q_mu * (zf - yf))
    return rebuild(x, result), s


def project_q(x: Point, y: Point, z: Point) -> Point:
    """Projection of x onto H(x, y) ∩ H(y, z)."""
    point, _ = q_projection(x, y, z)
    return point


def outer_step(x0: Point, x_n: Point, x_half: Point) -> Point:
    return project_q(x0, x_n, x_half)


@dataclass
class StoppingSpec:
    """
    Stop after max_iters, or once both ‖x_{n+1/2} - x_n‖ and ‖x_{n+1} - x_n‖
    have stayed at or below step_tol for patience consecutive iterations.
    """

    max_iters: int = 1000
    step_tol: float = 1e-10
    patience: int = 5


@dataclass(frozen=True)
class OuterRecord:
    n: int
    scalars: QScalars
    start_distance: float
    step_sq: float
    half_step_sq: float


@dataclass
class OuterTrace:
    records: list[OuterRecord] = field(default_factory=list)
    status: str = "max_iters"

    @property
    def iterations(self) -> int:
        return len(self.records)


def run_outer_loop(
    x0: Point,
    halfstep_oracle: Callable[[Point], Point],
    stop: StoppingSpec,
) -> tuple[Point, OuterTrace]:
    """
    Iterate x_{n+1} = Q(x0, x_n, oracle(x_n)) from x_0 = x0.

    Args:
        x0: Anchor and starting point
        halfstep_oracle: Map x_n ↦ x_{n+1/2} whose half-space H(x_n, x_{n+1/2})
            contains the target set
        stop: Stopping rule

    Returns:
        Final iterate and the per-iteration trace

    Raises:
        EmptyIntersectionError: If the oracle breaks the containment assumption
    """
    trace = OuterTrace()
    x = x0
    quiet = 0
    x0_flat = flatten(x0)
    for n in range(stop.max_iters):
        x_half = halfstep_oracle(x)
        x_next, scalars = q_projection(x0, x, x_half)

        x_flat = flatten(x)
        step = flatten(x_next) - x_flat
        half = flatten(x_half) - x_flat
        record = OuterRecord(
            n=n,
            scalars=scalars,
            start_distance=math.sqrt(inner(x0_flat - x_flat, x0_flat - x_flat)),
            step_sq=inner(step, step),
            half_step_sq=inner(half, half),
        )
        trace.records.append(record)
        logger.debug(
            "outer n=%d chi=%.3e mu=%.3e nu=%.3e rho=%.3e",
            n, scalars.q_chi, scalars.q_mu, scalars.q_nu, scalars.q_rho,
        )

        x = x_next
        if max(record.step_sq, record.half_step_sq) <= stop.step_tol**2:
            quiet += 1
            if quiet >= stop.patience:
                trace.status = "step_tolerance"
                break
        else:
            quiet = 0

    logger.info("Outer loop finished: status=%s iterations=%d", trace.status, trace.iterations)
    return x, trace
