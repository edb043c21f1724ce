"""
Reference projections onto the Kuhn-Tucker set for acceptance checks.

Three problem classes are covered:
1. Every operator affine: Z is an affine subspace, projected onto by a
   minimum-norm least-squares correction.
2. H = G = R with L = ℓ ≠ 0: Z is traced along the Minty parameter p. With
   x = J_A(p) and v = -(p - x)/ℓ the first inclusion holds for every p, and
   g(p) = sign(ℓ)(J_B(ℓx + v) - ℓx) is nonincreasing and vanishes exactly
   where (x, v) ∈ Z. The zero set of g is an interval whose image is a
   segment (Z is convex and lies on a curve), so once both ends are
   bracketed on a grid and bisected the projection is onto that segment.
   The parameter window is centred on the point being projected and doubled
   until the answer lies strictly inside it.
3. dim H = dim G with L diagonal and A, B splitting coordinatewise: Z is the
   product of scalar Kuhn-Tucker sets and is projected coordinate by
   coordinate through class 2.

Anything else is refused with UnsupportedOracleError.
"""

import logging
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from app.core.config import config
from app.core.errors import UnsupportedOracleError
from app.services.ktsolver import KTProblem
from app.services.operators import MonotoneOp
from app.services.space import Vec, as_vec

logger = logging.getLogger(__name__)

_MAX_BISECTIONS = 200


def _affine_projection(problem: KTProblem, x: Vec, v: Vec) -> tuple[Vec, Vec]:
    ma, ca = problem.A.affine_form()
    mb, cb = problem.B.affine_form()
    L = problem.L.to_dense()
    n, k = problem.A.dim, problem.B.dim
    # -L*v = M_A x + c_A and v = M_B L x + c_B
    system = np.block([[ma, L.T], [-mb @ L, np.eye(k)]])
    rhs = np.concatenate([-ca, cb])
    w = np.concatenate([x, v])
    correction, *_ = scipy.linalg.lstsq(system, rhs - system @ w)
    projected = w + correction
    residual = np.linalg.norm(system @ projected - rhs)
    if residual > 1e-8 * (1.0 + np.linalg.norm(rhs)):
        raise UnsupportedOracleError(f"Affine Kuhn-Tucker system is inconsistent (residual {residual:.3e})")
    return projected[:n], projected[n:]


class _MintyCurve:
    """p ↦ (J_A(p), -(p - J_A(p))/ℓ), which passes through every (x, v) with -ℓv ∈ Ax."""

    def __init__(self, A: MonotoneOp, B: MonotoneOp, ell: float):
        self.A = A
        self.B = B
        self.ell = ell

    def point(self, params) -> tuple[np.ndarray, np.ndarray]:
        params = np.atleast_1d(np.asarray(params, dtype=np.float64))
        xs = self.A.resolvent(1.0, params[:, None])[:, 0]
        return xs, -(params - xs) / self.ell

    def gap(self, params) -> np.ndarray:
        xs, vs = self.point(params)
        lx = self.ell * xs
        return np.sign(self.ell) * (self.B.resolvent(1.0, (lx + vs)[:, None])[:, 0] - lx)


def _bracket(
    curve: _MintyCurve,
    lo: float,
    hi: float,
    coarse: Callable[[np.ndarray], np.ndarray],
    fine: Callable[[float], bool],
    points: int,
    refinements: int,
) -> tuple[float, float]:
    """
    Narrow [lo, hi] to where a predicate that holds on the left stops holding.

    The coarse predicate drives `refinements` zoomed grids, the fine one the
    bisection that follows.
    """
    for _ in range(refinements):
        params = np.linspace(lo, hi, points)
        left = np.flatnonzero(coarse(curve.gap(params)))
        i = min(int(left[-1]), points - 2) if left.size else 0
        lo, hi = float(params[i]), float(params[i + 1])
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if fine(float(curve.gap(mid)[0])):
            lo = mid
        else:
            hi = mid
    return lo, hi


def _scalar_projection(
    A: MonotoneOp,
    B: MonotoneOp,
    ell: float,
    x: float,
    v: float,
    points: int,
    refinements: int,
    half_width: float,
    widenings: int,
    tol: float,
) -> tuple[float, float]:
    if ell == 0.0:
        raise UnsupportedOracleError("Scalar oracle needs a nonzero coupling")

    curve = _MintyCurve(A, B, ell)
    w = np.array([x, v])
    center = x - ell * v
    width = half_width
    for _ in range(widenings + 1):
        params = np.linspace(center - width, center + width, points)
        g = curve.gap(params)
        above = g > tol
        below = g < -tol
        if np.all(above) or np.all(below):
            width *= 2.0
            continue

        # g is nonincreasing: `above` is a prefix of the grid, `below` a suffix
        lo_open = not above[0]
        hi_open = not below[-1]
        p_lo = float(params[0])
        if not lo_open:
            i = int(np.flatnonzero(above)[-1])
            _, p_lo = _bracket(
                curve, params[i], params[i + 1],
                lambda values: values > tol, lambda value: value > 0.0, points, refinements,
            )
        p_hi = float(params[-1])
        if not hi_open:
            j = int(np.flatnonzero(below)[0])
            p_hi, _ = _bracket(
                curve, params[j - 1], params[j],
                lambda values: values >= -tol, lambda value: value >= 0.0, points, refinements,
            )

        xs, vs = curve.point([p_lo, p_hi])
        start = np.array([xs[0], vs[0]])
        segment = np.array([xs[1], vs[1]]) - start
        length_sq = float(segment @ segment)
        t = 0.0 if length_sq == 0.0 else float(np.clip((w - start) @ segment / length_sq, 0.0, 1.0))
        if (t == 0.0 and lo_open) or (t == 1.0 and hi_open):
            width *= 2.0
            continue
        projected = start + t * segment
        return float(projected[0]), float(projected[1])

    raise UnsupportedOracleError(
        f"No Kuhn-Tucker segment found within half-width {width / 2.0:.3e} of parameter {center:.6g}"
    )


def _coordinate_split(problem: KTProblem) -> Optional[list[tuple[MonotoneOp, MonotoneOp, float]]]:
    """(A_i, B_i, ℓ_i) per coordinate when L is square diagonal and A, B split; otherwise None."""
    if problem.A.dim != problem.B.dim:
        return None
    L = problem.L.to_dense()
    if np.count_nonzero(L - np.diag(np.diag(L))):
        return None
    pieces = []
    for i in range(problem.A.dim):
        a_i = problem.A.coordinate(i)
        b_i = problem.B.coordinate(i)
        if a_i is None or b_i is None:
            return None
        pieces.append((a_i, b_i, float(L[i, i])))
    return pieces


def oracle_project(
    problem: KTProblem,
    x: Optional[Vec] = None,
    v: Optional[Vec] = None,
    points: Optional[int] = None,
    refinements: Optional[int] = None,
    half_width: Optional[float] = None,
) -> tuple[Vec, Vec]:
    """
    P_Z(x, v), defaulting to the problem's start.

    Raises:
        ValueError: If the grid has fewer than 3 points
        UnsupportedOracleError: If the problem is outside the supported classes,
            or no Kuhn-Tucker point is found within the widening cap
    """
    x = problem.x0 if x is None else as_vec(x, problem.A.dim, "primal point")
    v = problem.v0 if v is None else as_vec(v, problem.B.dim, "dual point")

    if problem.A.affine_form() is not None and problem.B.affine_form() is not None:
        logger.debug("Affine oracle for dim H=%d, dim G=%d", problem.A.dim, problem.B.dim)
        return _affine_projection(problem, x, v)

    points = config.oracle_grid_points if points is None else points
    if points < 3:
        raise ValueError("Oracle grid needs at least 3 points")
    settings = {
        "points": points,
        "refinements": config.oracle_refinements if refinements is None else refinements,
        "half_width": config.oracle_half_width if half_width is None else half_width,
        "widenings": config.oracle_max_widenings,
        "tol": config.membership_tol,
    }

    pieces = _coordinate_split(problem)
    if pieces is None:
        raise UnsupportedOracleError(
            f"No oracle for non-affine problems with dim H={problem.A.dim}, dim G={problem.B.dim} "
            "that do not split coordinatewise"
        )
    logger.debug("Scalar oracle over %d coordinate(s)", len(pieces))
    projected = [
        _scalar_projection(a_i, b_i, ell, float(x[i]), float(v[i]), **settings)
        for i, (a_i, b_i, ell) in enumerate(pieces)
    ]
    return np.array([p[0] for p in projected]), np.array([p[1] for p in projected])
