"""
Primal-dual best approximation from the Kuhn-Tucker set.

For maximally monotone A on H, B on G and a linear L: H → G, the Kuhn-Tucker
set is

    Z = {(x, v) : -L*v ∈ Ax and Lx ∈ B⁻¹v}

and the solver computes P_Z(x0, v0) without knowing ‖L‖. Each iteration:

1. Evaluates one resolvent of A and one of B at the current pair, giving
   graph points (a, a*) and (b, b*) (the selection).
2. Forms s* = a* + L*b*, t = b - La and τ = ‖s*‖² + ‖t‖²; τ = 0 exactly at
   P_Z(x0, v0).
3. Steps the pair along -(s*, t) by θ = λ·num/τ (the half-step).
4. Projects (x0, v0) onto the intersection of the two half-spaces through the
   current pair and the half-step (Haugazeau mode), or simply accepts the
   half-step (Fejér mode, weak convergence to an unspecified point of Z).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.config import config
from app.core.errors import (
    EmptyIntersectionError,
    NonFiniteError,
    ParameterError,
    SignatureError,
)
from app.services.haugazeau import QScalars, q_projection, q_scalars
from app.services.operators import MonotoneOp
from app.services.space import LinearMap, SpaceSignature, Vec, as_vec, check_finite, inner, norm, norm_sq

logger = logging.getLogger(__name__)

Schedule = Callable[[int], float]


def constant(value: float) -> Schedule:
    value = float(value)

    def schedule(n: int) -> float:
        return value

    schedule.__name__ = f"constant({value!r})"
    return schedule


def cyclic(values: Sequence[float]) -> Schedule:
    """Schedule repeating values in order: n ↦ values[n mod len(values)]."""
    values = tuple(float(v) for v in values)
    if not values:
        raise ParameterError("cyclic schedule needs at least one value")

    def schedule(n: int) -> float:
        return values[n % len(values)]

    schedule.__name__ = f"cyclic({list(values)!r})"
    return schedule


class SolverMode(str, Enum):
    HAUGAZEAU = "haugazeau"
    FEJER = "fejer"


class SolveStatus(str, Enum):
    KT_POINT_REACHED = "kt_point_reached"
    STEP_TOLERANCE = "step_tolerance"
    MAX_ITERS = "max_iters"
    BREAKDOWN = "breakdown"

    @property
    def is_success(self) -> bool:
        return self in (SolveStatus.KT_POINT_REACHED, SolveStatus.STEP_TOLERANCE)


@dataclass(frozen=True)
class KTProblem:
    """
    Find P_Z(x0, v0) for 0 ∈ Ax + L*BLx.

    The primal problem is assumed solvable (Z nonempty); this is not checked.
    Signatures describe block structure for reporting; they default to a
    single block.
    """

    A: MonotoneOp
    B: MonotoneOp
    L: LinearMap
    x0: Vec
    v0: Vec
    x_signature: Optional[SpaceSignature] = None
    v_signature: Optional[SpaceSignature] = None

    def __post_init__(self):
        if self.A.dim != self.L.domain_dim:
            raise SignatureError(f"A acts on dimension {self.A.dim} but L reads {self.L.domain_dim}")
        if self.B.dim != self.L.codomain_dim:
            raise SignatureError(f"B acts on dimension {self.B.dim} but L maps into {self.L.codomain_dim}")
        object.__setattr__(self, "x0", as_vec(self.x0, self.A.dim, "primal start"))
        object.__setattr__(self, "v0", as_vec(self.v0, self.B.dim, "dual start"))
        if self.x_signature is None:
            object.__setattr__(self, "x_signature", SpaceSignature((self.A.dim,)))
        if self.v_signature is None:
            object.__setattr__(self, "v_signature", SpaceSignature((self.B.dim,)))
        if self.x_signature.total != self.A.dim or self.v_signature.total != self.B.dim:
            raise SignatureError("Block signatures do not match the operator dimensions")

    def pack(self, x: Vec, v: Vec) -> Vec:
        return np.concatenate([x, v])

    def unpack(self, w: Vec) -> tuple[Vec, Vec]:
        return w[: self.A.dim].copy(), w[self.A.dim :].copy()


@dataclass(frozen=True)
class GraphSelection:
    """(a, a*) ∈ gra A and (b, b*) ∈ gra B chosen at one iterate, plus derived steps."""

    a: Vec
    b: Vec
    a_star: Vec
    b_star: Vec
    s_star: Vec
    t: Vec
    tau: float
    theta_numerator: float
    x_minus_a: Vec
    lx_minus_b: Vec

    @property
    def s_norm(self) -> float:
        return norm(self.s_star)

    @property
    def t_norm(self) -> float:
        return norm(self.t)

    @property
    def primal_residual(self) -> float:
        return norm(self.x_minus_a)

    @property
    def dual_residual(self) -> float:
        return norm(self.lx_minus_b)


SelectionOracle = Callable[["KTProblem", Vec, Vec, float, float], GraphSelection]


@dataclass
class SolverConfig:
    """
    Parameters of one solve.

    Scheduled values are range-checked when drawn: γ_n, μ_n ∈ [ε, 1/ε] and
    λ_n ∈ [ε, 1] (Haugazeau) or [ε, 2 - ε] (Fejér).
    """

    mode: SolverMode = SolverMode.HAUGAZEAU
    epsilon: float = 0.1
    lambda_schedule: Schedule = field(default_factory=lambda: constant(1.0))
    gamma_schedule: Schedule = field(default_factory=lambda: constant(1.0))
    mu_schedule: Schedule = field(default_factory=lambda: constant(1.0))
    max_iters: int = 5000
    tau_tol: float = 1e-16
    dist_tol: float = 1e-10
    stall_window: int = 5

    def __post_init__(self):
        self.mode = SolverMode(self.mode)
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be at least 1, got {self.max_iters}")
        if not (self.tau_tol >= 0.0 and self.dist_tol >= 0.0):
            raise ParameterError(
                f"Tolerances must be nonnegative, got tau_tol={self.tau_tol!r}, dist_tol={self.dist_tol!r}"
            )
        if self.stall_window < 1:
            raise ParameterError(f"stall_window must be at least 1, got {self.stall_window}")

    @classmethod
    def from_settings(
        cls,
        mode: SolverMode | str = SolverMode.HAUGAZEAU,
        epsilon: Optional[float] = None,
        gamma: Optional[float] = None,
        mu: Optional[float] = None,
        lam: Optional[float] = None,
        max_iters: Optional[int] = None,
        tau_tol: Optional[float] = None,
        dist_tol: Optional[float] = None,
    ) -> "SolverConfig":
        """Constant schedules from the settings, with explicit values taking precedence."""
        mode = SolverMode(mode)
        default_lam = config.lambda_haugazeau if mode is SolverMode.HAUGAZEAU else config.lambda_fejer
        return cls(
            mode=mode,
            epsilon=config.epsilon if epsilon is None else epsilon,
            lambda_schedule=constant(default_lam if lam is None else lam),
            gamma_schedule=constant(config.gamma if gamma is None else gamma),
            mu_schedule=constant(config.mu if mu is None else mu),
            max_iters=config.max_iters if max_iters is None else max_iters,
            tau_tol=config.tau_tol if tau_tol is None else tau_tol,
            dist_tol=config.dist_tol if dist_tol is None else dist_tol,
            stall_window=config.stall_window,
        )

    @property
    def lambda_range(self) -> tuple[float, float]:
        upper = 1.0 if self.mode is SolverMode.HAUGAZEAU else 2.0 - self.epsilon
        return self.epsilon, upper

    def draw(self, n: int) -> tuple[float, float, float]:
        """(γ_n, μ_n, λ_n), each checked against its admissible range."""
        eps = self.epsilon
        gamma, mu, lam = self.gamma_schedule(n), self.mu_schedule(n), self.lambda_schedule(n)
        for name, value in (("gamma", gamma), ("mu", mu)):
            if not eps <= value <= 1.0 / eps:
                raise ParameterError(f"{name}_{n}={value!r} outside [{eps}, {1.0 / eps}]")
        low, high = self.lambda_range
        if not low <= lam <= high:
            raise ParameterError(f"lambda_{n}={lam!r} outside [{low}, {high}] for mode {self.mode.value}")
        return gamma, mu, lam


@dataclass(frozen=True)
class StepOutcome:
    x: Vec
    v: Vec
    x_half: Vec
    v_half: Vec
    theta: float
    scalars: QScalars


@dataclass(frozen=True)
class IterationRecord:
    n: int
    tau: float
    theta: float
    scalars: QScalars
    start_distance: float
    s_norm: float
    t_norm: float
    primal_residual: float
    dual_residual: float
    primal_block_residuals: tuple[float, ...]
    dual_block_residuals: tuple[float, ...]
    gamma: float
    mu: float
    lam: float
    x: Vec
    v: Vec
    x_half: Vec
    v_half: Vec
    selection: GraphSelection


@dataclass
class IterationTrace:
    x_signature: SpaceSignature
    v_signature: SpaceSignature
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        if name.startswith("q_"):
            return np.array([getattr(r.scalars, name) for r in self.records])
        return np.array([getattr(r, name) for r in self.records])

    def columns(self) -> list[str]:
        return (
            [
                "n", "tau", "theta", "q_chi", "q_mu", "q_nu", "q_rho",
                "start_distance", "s_norm", "t_norm", "primal_residual", "dual_residual",
            ]
            + [f"x_{i}" for i in range(self.x_signature.total)]
            + [f"v_{k}" for k in range(self.v_signature.total)]
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per iteration with the trace-file columns."""
        rows = []
        for r in self.records:
            rows.append(
                [
                    r.n, r.tau, r.theta,
                    r.scalars.q_chi, r.scalars.q_mu, r.scalars.q_nu, r.scalars.q_rho,
                    r.start_distance, r.s_norm, r.t_norm, r.primal_residual, r.dual_residual,
                    *r.x.tolist(), *r.v.tolist(),
                ]
            )
        frame = pd.DataFrame(rows, columns=self.columns())
        frame["n"] = frame["n"].astype("int64")
        return frame


class SolveResult(NamedTuple):
    x: Vec
    v: Vec
    trace: IterationTrace
    status: SolveStatus

    @property
    def iterations(self) -> int:
        return len(self.trace)


def select_resolvent(problem: KTProblem, x: Vec, v: Vec, gamma: float, mu: float) -> GraphSelection:
    """
    Graph points from one resolvent of A and one of B.

        a = J_{γA}(x - γL*v)        a* = (x - a)/γ - L*v
        b = J_{μB}(Lx + μv)         b* = (Lx - b)/μ + v
        s* = (x - a)/γ + L*(Lx - b)/μ
        t = b - La
    """
    L = problem.L
    lt_v = L.adjoint_apply(v)
    a = problem.A.resolvent(gamma, x - gamma * lt_v)
    l = L.apply(x)
    b = problem.B.resolvent(mu, l + mu * v)

    x_a = x - a
    l_b = l - b
    s_star = x_a / gamma + L.adjoint_apply(l_b) / mu
    t = b - L.apply(a)
    return GraphSelection(
        a=a,
        b=b,
        a_star=x_a / gamma - lt_v,
        b_star=l_b / mu + v,
        s_star=s_star,
        t=t,
        tau=inner(s_star, s_star) + inner(t, t),
        theta_numerator=inner(x_a, x_a) / gamma + inner(l_b, l_b) / mu,
        x_minus_a=x_a,
        lx_minus_b=l_b,
    )


def theorem_step(
    x: Vec,
    v: Vec,
    sel: GraphSelection,
    lam: float,
    x0: Vec,
    v0: Vec,
    mode: SolverMode = SolverMode.HAUGAZEAU,
    rho_tol: Optional[float] = None,
    cs_clamp: Optional[float] = None,
) -> StepOutcome:
    """
    One update from the selection made at (x, v).

    θ = λ·num/τ (0 when τ = 0); the half-step is (x - θs*, v - θt). Haugazeau
    mode then applies Q((x0, v0), (x, v), half-step) on H ⊕ G; Fejér mode
    keeps the half-step.

    Raises:
        EmptyIntersectionError: If the two half-spaces do not meet
    """
    theta = 0.0 if sel.tau == 0.0 else lam * sel.theta_numerator / sel.tau
    x_half = x - theta * sel.s_star
    v_half = v - theta * sel.t

    w0 = np.concatenate([x0, v0])
    w = np.concatenate([x, v])
    w_half = np.concatenate([x_half, v_half])
    if SolverMode(mode) is SolverMode.FEJER:
        scalars = q_scalars(w0, w, w_half, cs_clamp)
        w_next = w_half
    else:
        w_next, scalars = q_projection(w0, w, w_half, rho_tol, cs_clamp)

    dim = x.shape[0]
    return StepOutcome(
        x=w_next[:dim].copy(),
        v=w_next[dim:].copy(),
        x_half=x_half,
        v_half=v_half,
        theta=theta,
        scalars=scalars,
    )


def _block_norms(signature: SpaceSignature, vec: Vec) -> tuple[float, ...]:
    return tuple(norm(block) for block in signature.split(vec))


def _record(
    problem: KTProblem,
    n: int,
    x: Vec,
    v: Vec,
    sel: GraphSelection,
    step: StepOutcome,
    params: tuple[float, float, float],
) -> IterationRecord:
    dx = problem.x0 - x
    dv = problem.v0 - v
    return IterationRecord(
        n=n,
        tau=sel.tau,
        theta=step.theta,
        scalars=step.scalars,
        start_distance=math.sqrt(norm_sq(dx) + norm_sq(dv)),
        s_norm=sel.s_norm,
        t_norm=sel.t_norm,
        primal_residual=sel.primal_residual,
        dual_residual=sel.dual_residual,
        primal_block_residuals=_block_norms(problem.x_signature, sel.x_minus_a),
        dual_block_residuals=_block_norms(problem.v_signature, sel.lx_minus_b),
        gamma=params[0],
        mu=params[1],
        lam=params[2],
        x=x,
        v=v,
        x_half=step.x_half,
        v_half=step.v_half,
        selection=sel,
    )


def iterate(
    problem: KTProblem,
    cfg: SolverConfig,
    select: SelectionOracle = select_resolvent,
) -> SolveResult:
    """
    Run the primal-dual iteration with a pluggable selection oracle.

    Stops when τ_n ≤ tau_tol (the current pair is the answer), when
    ‖w_{n+1} - w_n‖ ≤ dist_tol for stall_window consecutive iterations, on
    breakdown of the half-space projector, or after max_iters.

    Raises:
        NonFiniteError: If NaN or Inf appears; the partial trace is attached
        ParameterError: If a scheduled value leaves its admissible range
    """
    trace = IterationTrace(problem.x_signature, problem.v_signature)
    x, v = problem.x0.copy(), problem.v0.copy()
    status = SolveStatus.MAX_ITERS
    quiet = 0
    logger.info(
        "Starting %s solve: A=%s, B=%s, L=%s, max_iters=%d",
        cfg.mode.value, problem.A.tag, problem.B.tag, problem.L.describe(), cfg.max_iters,
    )

    for n in range(cfg.max_iters):
        params = cfg.draw(n)
        gamma, mu, lam = params
        try:
            sel = select(problem, x, v, gamma, mu)
            if sel.tau <= cfg.tau_tol:
                stationary = replace(sel, tau=0.0)
                step = theorem_step(x, v, stationary, lam, problem.x0, problem.v0, cfg.mode)
                trace.records.append(_record(problem, n, x, v, stationary, step, params))
                status = SolveStatus.KT_POINT_REACHED
                break
            step = theorem_step(x, v, sel, lam, problem.x0, problem.v0, cfg.mode)
            check_finite(step.x, "primal iterate")
            check_finite(step.v, "dual iterate")
        except EmptyIntersectionError as exc:
            logger.warning("Breakdown at iteration %d: %s", n, exc)
            status = SolveStatus.BREAKDOWN
            break
        except NonFiniteError as exc:
            logger.error("Non-finite value at iteration %d: %s", n, exc)
            raise NonFiniteError(f"Iteration {n}: {exc}", trace=trace) from exc

        trace.records.append(_record(problem, n, x, v, sel, step, params))
        logger.debug(
            "n=%d tau=%.3e theta=%.3e start_distance=%.6e",
            n, sel.tau, step.theta, trace.records[-1].start_distance,
        )

        dx = step.x - x
        dv = step.v - v
        moved = math.sqrt(norm_sq(dx) + norm_sq(dv))
        x, v = step.x, step.v
        quiet = quiet + 1 if moved <= cfg.dist_tol else 0
        if quiet >= cfg.stall_window:
            status = SolveStatus.STEP_TOLERANCE
            break

    final_tau = trace.records[-1].tau if trace.records else float("nan")
    logger.info(
        "Finished %s solve: status=%s iterations=%d tau=%.3e",
        cfg.mode.value, status.value, len(trace), final_tau,
    )
    return SolveResult(x=x, v=v, trace=trace, status=status)


def solve(problem: KTProblem, cfg: SolverConfig) -> SolveResult:
    """Haugazeau mode: converges strongly to P_Z(x0, v0)."""
    if cfg.mode is not SolverMode.HAUGAZEAU:
        cfg = replace(cfg, mode=SolverMode.HAUGAZEAU)
    return iterate(problem, cfg)


def fejer_solve(problem: KTProblem, cfg: SolverConfig) -> SolveResult:
    """Fejér baseline: accepts every half-step, limit is some point of Z."""
    if cfg.mode is not SolverMode.FEJER:
        cfg = replace(cfg, mode=SolverMode.FEJER)
    return iterate(problem, cfg)


def run(problem: KTProblem, cfg: SolverConfig) -> SolveResult:
    """Dispatch on cfg.mode."""
    return fejer_solve(problem, cfg) if cfg.mode is SolverMode.FEJER else solve(problem, cfg)


def kt_residual(problem: KTProblem, x: Vec, v: Vec, gamma: float, mu: float) -> tuple[float, float]:
    """(‖s*‖, ‖t‖) of a fresh selection at (x, v); both vanish exactly on Z."""
    sel = select_resolvent(problem, as_vec(x, problem.A.dim), as_vec(v, problem.B.dim), gamma, mu)
    return sel.s_norm, sel.t_norm


def alpha_constant(epsilon: float, l_norm: float) -> float:
    """α such that the resolvent selection satisfies the G_α inequality."""
    l_sq = l_norm * l_norm
    return epsilon / (1.0 + l_sq + 2.0 * (1.0 - epsilon * epsilon) * max(1.0, l_sq))


def g_alpha_gap(problem: KTProblem, x: Vec, v: Vec, sel: GraphSelection, alpha: float) -> float:
    """
    ⟨x - a, a* + L*v⟩ + ⟨Lx - b, b* - v⟩ - α(‖a* + L*b*‖² + ‖La - b‖²).

    Nonnegative when the selection is G_α-certified at (x, v).
    """
    L = problem.L
    lhs = inner(x - sel.a, sel.a_star + L.adjoint_apply(v)) + inner(
        L.apply(x) - sel.b, sel.b_star - v
    )
    s = sel.a_star + L.adjoint_apply(sel.b_star)
    t = L.apply(sel.a) - sel.b
    return lhs - alpha * (inner(s, s) + inner(t, t))
