"""
Coupled systems of monotone inclusions.

A system couples m primal inclusions through K linear rows:

    z_i ∈ A_i x_i + Σ_k L*_ki B_k(Σ_j L_kj x_j - r_k),   i = 1..m

It is solved by lifting to a single problem on H_1 ⊕ ... ⊕ H_m and
G_1 ⊕ ... ⊕ G_K with A = ×(A_i - z_i), B = ×B_k(· - r_k) and L = (L_ki), so the
block iteration is exactly the two-operator iteration on the lifted data.

Two front ends build systems:

1. build_relaxation: replaces an inconsistent common-zero problem
   0 ∈ Ax + Σ_k B_k x by its parallel-sum relaxation with kernels S_k.
2. build_minimization: A_i = ∂f_i, B_k = ∂g_k for prox-capable functions,
   whose limits solve the primal and dual minimization problems.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg

from app.core.config import config
from app.core.errors import SignatureError
from app.services.functions import ProxFunction
from app.services.ktsolver import IterationTrace, KTProblem, SolverConfig, SolveStatus, run
from app.services.operators import (
    GraphPoint,
    MonotoneOp,
    ShiftedOperator,
    graph_residual,
    inverse_graph_residual,
)
from app.services.space import (
    BlockMap,
    IdentityMap,
    LinearMap,
    NegatedIdentityMap,
    SpaceSignature,
    Vec,
    ZeroMap,
    as_vec,
    inner,
)

logger = logging.getLogger(__name__)


class ProductOperator(MonotoneOp):
    """×_i A_i on H_1 ⊕ ... ⊕ H_m; the resolvent acts blockwise."""

    tag = "product"

    def __init__(self, factors: Sequence[MonotoneOp], workers: Optional[int] = None):
        if not factors:
            raise SignatureError("Product operator needs at least one factor")
        self.factors = tuple(factors)
        self.signature = SpaceSignature(tuple(f.dim for f in self.factors))
        super().__init__(self.signature.total)
        self.workers = config.block_workers if workers is None else workers

    def _resolvent(self, gamma, w):
        blocks = self.signature.split(w)
        if self.workers > 1 and len(self.factors) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                # map() yields in submission order
                out = list(
                    executor.map(lambda factor, block: factor.resolvent(gamma, block), self.factors, blocks)
                )
        else:
            out = [factor.resolvent(gamma, block) for factor, block in zip(self.factors, blocks)]
        return self.signature.join(out)

    def parameters(self):
        return {"factors": [f.descriptor() for f in self.factors]}

    def affine_form(self):
        forms = [f.affine_form() for f in self.factors]
        if any(form is None for form in forms):
            return None
        return scipy.linalg.block_diag(*(m for m, _ in forms)), np.concatenate([c for _, c in forms])

    def coordinate(self, index):
        self._check_index(index)
        offsets = self.signature.offsets
        block = int(np.searchsorted(offsets, index, side="right")) - 1
        return self.factors[block].coordinate(index - offsets[block])


def _is_zero(vec: Vec) -> bool:
    return not np.any(vec)


@dataclass
class SystemProblem:
    """
    m primal and K dual blocks coupled by the K×m grid L[k][i] = L_ki.

    z and r default to zero; the start defaults to zero in every block.
    """

    A: list[MonotoneOp]
    B: list[MonotoneOp]
    L: list[list[LinearMap]]
    z: Optional[list[Vec]] = None
    r: Optional[list[Vec]] = None
    x0: Optional[list[Vec]] = None
    v0: Optional[list[Vec]] = None

    def __post_init__(self):
        if not self.A or not self.B:
            raise SignatureError("A system needs at least one primal and one dual block")
        if len(self.L) != self.K:
            raise SignatureError(f"Coupling grid has {len(self.L)} rows, expected K={self.K}")
        for k, row in enumerate(self.L):
            if len(row) != self.m:
                raise SignatureError(f"Coupling row {k} has {len(row)} entries, expected m={self.m}")
            for i, block in enumerate(row):
                if block.domain_dim != self.A[i].dim or block.codomain_dim != self.B[k].dim:
                    raise SignatureError(
                        f"L[{k}][{i}] maps {block.domain_dim} -> {block.codomain_dim}, "
                        f"expected {self.A[i].dim} -> {self.B[k].dim}"
                    )
        self.z = self._blocks(self.z, self.x_signature, "z")
        self.r = self._blocks(self.r, self.v_signature, "r")
        self.x0 = self._blocks(self.x0, self.x_signature, "primal start")
        self.v0 = self._blocks(self.v0, self.v_signature, "dual start")

    @staticmethod
    def _blocks(values, signature: SpaceSignature, name: str) -> list[Vec]:
        if values is None:
            return [np.zeros(d) for d in signature.dims]
        if len(values) != len(signature.dims):
            raise SignatureError(f"{name} has {len(values)} blocks, expected {len(signature.dims)}")
        return [as_vec(value, d, f"{name}[{i}]") for i, (value, d) in enumerate(zip(values, signature.dims))]

    @property
    def m(self) -> int:
        return len(self.A)

    @property
    def K(self) -> int:
        return len(self.B)

    @property
    def x_signature(self) -> SpaceSignature:
        return SpaceSignature(tuple(op.dim for op in self.A))

    @property
    def v_signature(self) -> SpaceSignature:
        return SpaceSignature(tuple(op.dim for op in self.B))

    def row_apply(self, k: int, x_blocks: Sequence[Vec]) -> Vec:
        """Σ_i L_ki x_i in ascending i, zero blocks skipped."""
        acc = np.zeros(self.B[k].dim)
        for i, block in enumerate(self.L[k]):
            if not block.is_zero:
                acc = acc + block.apply(x_blocks[i])
        return acc

    def column_adjoint(self, i: int, v_blocks: Sequence[Vec]) -> Vec:
        """Σ_k L*_ki v_k in ascending k, zero blocks skipped."""
        acc = np.zeros(self.A[i].dim)
        for k in range(self.K):
            block = self.L[k][i]
            if not block.is_zero:
                acc = acc + block.adjoint_apply(v_blocks[k])
        return acc


def lift(sys: SystemProblem, workers: Optional[int] = None) -> KTProblem:
    """
    The equivalent two-operator problem on the product spaces.

    J_{γA}(x) = (J_{γA_i}(x_i + γz_i))_i and J_{μB}(y) = (r_k + J_{μB_k}(y_k - r_k))_k.
    Zero z_i and r_k leave the factor unwrapped.
    """
    a_factors = [
        op if _is_zero(z) else ShiftedOperator(op, offset=-z) for op, z in zip(sys.A, sys.z)
    ]
    b_factors = [
        op if _is_zero(r) else ShiftedOperator(op, shift=r) for op, r in zip(sys.B, sys.r)
    ]
    return KTProblem(
        A=ProductOperator(a_factors, workers),
        B=ProductOperator(b_factors, workers),
        L=BlockMap(sys.L),
        x0=np.concatenate(sys.x0),
        v0=np.concatenate(sys.v0),
        x_signature=sys.x_signature,
        v_signature=sys.v_signature,
    )


class SystemResult(NamedTuple):
    x: list[Vec]
    v: list[Vec]
    trace: IterationTrace
    status: SolveStatus


def solve_system(sys: SystemProblem, cfg: SolverConfig) -> SystemResult:
    result = run(lift(sys), cfg)
    logger.info("System solve (m=%d, K=%d) finished with status %s", sys.m, sys.K, result.status.value)
    return SystemResult(
        x=list(sys.x_signature.split(result.x)),
        v=list(sys.v_signature.split(result.v)),
        trace=result.trace,
        status=result.status,
    )


@dataclass
class RelaxationSpec:
    """
    Relax 0 ∈ Ax + Σ_k B_k x into 0 ∈ Ax + Σ_k (B_k □ S_k) x.

    Each kernel S_k must be strictly monotone with S_k⁻¹0 = {0}; the catalog
    provides ρ·Id. Solutions coincide with the common zeros when those exist.
    """

    A: MonotoneOp
    B: list[MonotoneOp]
    S: list[MonotoneOp]
    x0: Optional[Vec] = None
    v0: Optional[list[Vec]] = None

    def __post_init__(self):
        if not self.B or len(self.B) != len(self.S):
            raise SignatureError(f"Relaxation needs matching B and S lists, got {len(self.B)} and {len(self.S)}")
        for k, (b, s) in enumerate(zip(self.B, self.S)):
            if b.dim != self.A.dim or s.dim != self.A.dim:
                raise SignatureError(f"B[{k}] and S[{k}] must act on dimension {self.A.dim}")


def build_relaxation(spec: RelaxationSpec) -> SystemProblem:
    """
    m = K + 1 system: A_1 = A, A_{k+1} = S_k, G_k = H, z = r = 0,
    and row k of L is [Id, 0, ..., -Id (column k+1), ..., 0].
    """
    K = len(spec.B)
    d = spec.A.dim
    grid: list[list[LinearMap]] = []
    for k in range(K):
        row: list[LinearMap] = [IdentityMap(d)]
        for j in range(K):
            row.append(NegatedIdentityMap(d) if j == k else ZeroMap(d, d))
        grid.append(row)
    x0 = None
    if spec.x0 is not None:
        x0 = [as_vec(spec.x0, d, "relaxation start")] + [np.zeros(d) for _ in range(K)]
    return SystemProblem(A=[spec.A, *spec.S], B=list(spec.B), L=grid, x0=x0, v0=spec.v0)


@dataclass
class MinimizationSpec:
    """
    minimize Σ_i (f_i(x_i) - ⟨x_i, z_i⟩) + Σ_k g_k(Σ_i L_ki x_i - r_k)

    together with its dual. The range qualification condition is assumed.
    """

    f: list[ProxFunction]
    g: list[ProxFunction]
    L: list[list[LinearMap]]
    z: Optional[list[Vec]] = None
    r: Optional[list[Vec]] = None
    x0: Optional[list[Vec]] = None
    v0: Optional[list[Vec]] = None
    system: SystemProblem = field(init=False, repr=False)

    def __post_init__(self):
        self.system = SystemProblem(
            A=[f.subdifferential() for f in self.f],
            B=[g.subdifferential() for g in self.g],
            L=self.L,
            z=self.z,
            r=self.r,
            x0=self.x0,
            v0=self.v0,
        )
        self.z = self.system.z
        self.r = self.system.r


def build_minimization(spec: MinimizationSpec) -> SystemProblem:
    """A_i = ∂f_i and B_k = ∂g_k; their resolvents are prox_{γf_i} and prox_{μg_k}."""
    return spec.system


def primal_value(spec: MinimizationSpec, x_blocks: Sequence[Vec]) -> float:
    sys = spec.system
    terms = [f.value(x) - inner(x, z) for f, x, z in zip(spec.f, x_blocks, sys.z)]
    terms += [g.value(sys.row_apply(k, x_blocks) - sys.r[k]) for k, g in enumerate(spec.g)]
    return math.fsum(terms)


def dual_value(spec: MinimizationSpec, v_blocks: Sequence[Vec]) -> float:
    sys = spec.system
    terms = [
        f.conjugate(sys.z[i] - sys.column_adjoint(i, v_blocks)) for i, f in enumerate(spec.f)
    ]
    terms += [g.conjugate(v) + inner(v, r) for g, v, r in zip(spec.g, v_blocks, sys.r)]
    return math.fsum(terms)


def duality_gap(spec: MinimizationSpec, x_blocks: Sequence[Vec], v_blocks: Sequence[Vec]) -> float:
    """Primal value plus dual value: nonnegative, and zero at a Kuhn-Tucker point."""
    return primal_value(spec, x_blocks) + dual_value(spec, v_blocks)


def kt_membership_residuals(
    sys: SystemProblem,
    x_blocks: Sequence[Vec],
    v_blocks: Sequence[Vec],
    gamma: float = 1.0,
) -> tuple[list[float], list[float]]:
    """
    Graph residuals certifying membership in the Kuhn-Tucker set:
    (x_i, z_i - Σ_k L*_ki v_k) ∈ gra A_i and (v_k, Σ_i L_ki x_i - r_k) ∈ gra B_k⁻¹.
    """
    primal = [
        graph_residual(op, gamma, GraphPoint(a=x_blocks[i], a_star=sys.z[i] - sys.column_adjoint(i, v_blocks)))
        for i, op in enumerate(sys.A)
    ]
    dual = [
        inverse_graph_residual(op, gamma, GraphPoint(a=v_blocks[k], a_star=sys.row_apply(k, x_blocks) - sys.r[k]))
        for k, op in enumerate(sys.B)
    ]
    return primal, dual
