from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class _Entry(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Operators


class ZeroOperatorSpec(_Entry):
    tag: Literal["zero"]
    dim: int = Field(gt=0)


class AffineOperatorSpec(_Entry):
    tag: Literal["affine"]
    matrix: list[list[float]]
    offset: Optional[list[float]] = None


class BoxNormalConeSpec(_Entry):
    tag: Literal["box_normal_cone"]
    lower: list[float]
    upper: list[float]


class AffineNormalConeSpec(_Entry):
    tag: Literal["affine_normal_cone"]
    matrix: list[list[float]]
    rhs: list[float]


class L1OperatorSpec(_Entry):
    tag: Literal["l1"]
    dim: int = Field(gt=0)
    weight: float = 1.0


class SquaredDistanceOperatorSpec(_Entry):
    tag: Literal["squared_distance"]
    anchor: list[float]


class BallNormalConeSpec(_Entry):
    tag: Literal["ball_normal_cone"]
    center: list[float]
    radius: float


class ScaledIdentitySpec(_Entry):
    tag: Literal["scaled_identity"]
    dim: int = Field(gt=0)
    rho: float = 1.0


class ShiftedOperatorSpec(_Entry):
    tag: Literal["shifted"]
    base: "OperatorSpec"
    shift: Optional[list[float]] = None
    offset: Optional[list[float]] = None


OperatorSpec = Annotated[
    Union[
        ZeroOperatorSpec,
        AffineOperatorSpec,
        BoxNormalConeSpec,
        AffineNormalConeSpec,
        L1OperatorSpec,
        SquaredDistanceOperatorSpec,
        BallNormalConeSpec,
        ScaledIdentitySpec,
        ShiftedOperatorSpec,
    ],
    Field(discriminator="tag"),
]

ShiftedOperatorSpec.model_rebuild()


# Functions


class ZeroFunctionSpec(_Entry):
    tag: Literal["zero"]
    dim: int = Field(gt=0)


class BoxIndicatorSpec(_Entry):
    tag: Literal["box_indicator"]
    lower: list[float]
    upper: list[float]


class BallIndicatorSpec(_Entry):
    tag: Literal["ball_indicator"]
    center: list[float]
    radius: float


class L1NormSpec(_Entry):
    tag: Literal["l1"]
    dim: int = Field(gt=0)
    weight: float = 1.0


class SquaredDistanceSpec(_Entry):
    tag: Literal["squared_distance"]
    anchor: list[float]


FunctionSpec = Annotated[
    Union[ZeroFunctionSpec, BoxIndicatorSpec, BallIndicatorSpec, L1NormSpec, SquaredDistanceSpec],
    Field(discriminator="tag"),
]


# Couplings


class IdentityCouplingSpec(_Entry):
    tag: Literal["identity"]
    dim: int = Field(gt=0)


class NegatedIdentityCouplingSpec(_Entry):
    tag: Literal["negated_identity"]
    dim: int = Field(gt=0)


class ZeroCouplingSpec(_Entry):
    tag: Literal["zero"]
    domain: int = Field(gt=0)
    codomain: int = Field(gt=0)


class DenseCouplingSpec(_Entry):
    """Row-major matrix; each inner list is one row."""

    tag: Literal["dense"]
    rows: list[list[float]]


class ScaledCouplingSpec(_Entry):
    tag: Literal["scaled"]
    base: "CouplingSpec"
    scale: float


CouplingSpec = Annotated[
    Union[
        IdentityCouplingSpec,
        NegatedIdentityCouplingSpec,
        ZeroCouplingSpec,
        DenseCouplingSpec,
        ScaledCouplingSpec,
    ],
    Field(discriminator="tag"),
]

ScaledCouplingSpec.model_rebuild()


# Document sections


class Spaces(_Entry):
    primal: list[int] = Field(min_length=1)
    dual: list[int] = Field(min_length=1)


class OperatorsSection(_Entry):
    A: list[OperatorSpec] = Field(min_length=1)
    B: list[OperatorSpec] = Field(min_length=1)


class FunctionsSection(_Entry):
    f: list[FunctionSpec] = Field(min_length=1)
    g: list[FunctionSpec] = Field(min_length=1)


class Constants(_Entry):
    z: Optional[list[list[float]]] = None
    r: Optional[list[list[float]]] = None


class Start(_Entry):
    x: Optional[list[list[float]]] = None
    v: Optional[list[list[float]]] = None


class SolverSection(_Entry):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    mode: Optional[Literal["haugazeau", "fejer"]] = None
    epsilon: Optional[float] = None
    gamma: Optional[float] = None
    mu: Optional[float] = None
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    max_iters: Optional[int] = None
    tau_tol: Optional[float] = None
    dist_tol: Optional[float] = None


class ProblemDocument(_Entry):
    """
    A problem file.

    kind selects which sections apply:
        inclusion     operators (one A, one B), couplings (1×1)
        system        operators, couplings (K×m), constants
        relaxation    operators (one A, K B's), kernels (K)
        minimization  functions, couplings, constants
    """

    kind: Literal["inclusion", "system", "relaxation", "minimization"]
    spaces: Spaces
    operators: Optional[OperatorsSection] = None
    functions: Optional[FunctionsSection] = None
    kernels: Optional[list[OperatorSpec]] = None
    couplings: Optional[list[list[CouplingSpec]]] = None
    constants: Optional[Constants] = None
    start: Optional[Start] = None
    solver: Optional[SolverSection] = None
