"""
Problem-file ingestion.

A problem file is a JSON document (see features/problem-file-format.md).
Loading runs in three stages:
1. JSON syntax, with line and column on failure
2. Schema validation through the pydantic models in app.models.problem
3. Dimension and catalog rules, every failure collected before raising

The validated document is then built into solver objects.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from pydantic import ValidationError

from app.core.errors import (
    KTSolveError,
    ProblemParseError,
    ProblemValidationError,
)
from app.models.problem import (
    AffineNormalConeSpec,
    AffineOperatorSpec,
    BallIndicatorSpec,
    BallNormalConeSpec,
    BoxIndicatorSpec,
    BoxNormalConeSpec,
    DenseCouplingSpec,
    IdentityCouplingSpec,
    L1NormSpec,
    L1OperatorSpec,
    NegatedIdentityCouplingSpec,
    ProblemDocument,
    ScaledCouplingSpec,
    ScaledIdentitySpec,
    ShiftedOperatorSpec,
    SolverSection,
    SquaredDistanceOperatorSpec,
    SquaredDistanceSpec,
    ZeroCouplingSpec,
    ZeroFunctionSpec,
    ZeroOperatorSpec,
)
from app.services.functions import (
    BallIndicator,
    BoxIndicator,
    L1Norm,
    ProxFunction,
    SquaredDistance,
    ZeroFunction,
)
from app.services.ktsolver import KTProblem, SolverConfig
from app.services.operators import (
    AffineOperator,
    AffineSubspaceNormalCone,
    BallNormalCone,
    BoxNormalCone,
    L1Subdifferential,
    MonotoneOp,
    ScaledIdentityOperator,
    ShiftedOperator,
    SquaredDistanceSubdifferential,
    ZeroOperator,
)
from app.services.space import (
    DenseMap,
    IdentityMap,
    LinearMap,
    NegatedIdentityMap,
    ScaledMap,
    ZeroMap,
)
from app.services.systems import (
    MinimizationSpec,
    RelaxationSpec,
    SystemProblem,
    build_minimization,
    build_relaxation,
    lift,
)

logger = logging.getLogger(__name__)


# Dimensions of catalog entries


def operator_dim(spec) -> int:
    match spec:
        case ZeroOperatorSpec() | L1OperatorSpec() | ScaledIdentitySpec():
            return spec.dim
        case AffineOperatorSpec():
            return len(spec.matrix)
        case BoxNormalConeSpec():
            return len(spec.lower)
        case AffineNormalConeSpec():
            return len(spec.matrix[0]) if spec.matrix else 0
        case SquaredDistanceOperatorSpec():
            return len(spec.anchor)
        case BallNormalConeSpec():
            return len(spec.center)
        case ShiftedOperatorSpec():
            return operator_dim(spec.base)
    raise TypeError(f"Unknown operator spec {type(spec).__name__}")


def function_dim(spec) -> int:
    match spec:
        case ZeroFunctionSpec() | L1NormSpec():
            return spec.dim
        case BoxIndicatorSpec():
            return len(spec.lower)
        case BallIndicatorSpec():
            return len(spec.center)
        case SquaredDistanceSpec():
            return len(spec.anchor)
    raise TypeError(f"Unknown function spec {type(spec).__name__}")


def coupling_dims(spec) -> tuple[int, int]:
    """(domain, codomain) of a coupling entry."""
    match spec:
        case IdentityCouplingSpec() | NegatedIdentityCouplingSpec():
            return spec.dim, spec.dim
        case ZeroCouplingSpec():
            return spec.domain, spec.codomain
        case DenseCouplingSpec():
            return (len(spec.rows[0]) if spec.rows else 0), len(spec.rows)
        case ScaledCouplingSpec():
            return coupling_dims(spec.base)
    raise TypeError(f"Unknown coupling spec {type(spec).__name__}")


# Builders


def build_operator(spec) -> MonotoneOp:
    match spec:
        case ZeroOperatorSpec():
            return ZeroOperator(spec.dim)
        case AffineOperatorSpec():
            return AffineOperator(spec.matrix, spec.offset)
        case BoxNormalConeSpec():
            return BoxNormalCone(spec.lower, spec.upper)
        case AffineNormalConeSpec():
            return AffineSubspaceNormalCone(spec.matrix, spec.rhs)
        case L1OperatorSpec():
            return L1Subdifferential(spec.dim, spec.weight)
        case SquaredDistanceOperatorSpec():
            return SquaredDistanceSubdifferential(spec.anchor)
        case BallNormalConeSpec():
            return BallNormalCone(spec.center, spec.radius)
        case ScaledIdentitySpec():
            return ScaledIdentityOperator(spec.dim, spec.rho)
        case ShiftedOperatorSpec():
            return ShiftedOperator(build_operator(spec.base), spec.shift, spec.offset)
    raise TypeError(f"Unknown operator spec {type(spec).__name__}")


def build_function(spec) -> ProxFunction:
    match spec:
        case ZeroFunctionSpec():
            return ZeroFunction(spec.dim)
        case BoxIndicatorSpec():
            return BoxIndicator(spec.lower, spec.upper)
        case BallIndicatorSpec():
            return BallIndicator(spec.center, spec.radius)
        case L1NormSpec():
            return L1Norm(spec.dim, spec.weight)
        case SquaredDistanceSpec():
            return SquaredDistance(spec.anchor)
    raise TypeError(f"Unknown function spec {type(spec).__name__}")


def build_coupling(spec) -> LinearMap:
    match spec:
        case IdentityCouplingSpec():
            return IdentityMap(spec.dim)
        case NegatedIdentityCouplingSpec():
            return NegatedIdentityMap(spec.dim)
        case ZeroCouplingSpec():
            return ZeroMap(spec.domain, spec.codomain)
        case DenseCouplingSpec():
            return DenseMap(spec.rows)
        case ScaledCouplingSpec():
            return ScaledMap(build_coupling(spec.base), spec.scale)
    raise TypeError(f"Unknown coupling spec {type(spec).__name__}")


# Validation rules


@dataclass
class RuleResult:
    """Result of one problem rule."""

    rule_name: str
    passed: bool
    message: str = ""


_REQUIRED = {
    "inclusion": ("operators", "couplings"),
    "system": ("operators", "couplings"),
    "relaxation": ("operators", "kernels"),
    "minimization": ("functions", "couplings"),
}
_FORBIDDEN = {
    "inclusion": ("functions", "kernels", "constants"),
    "system": ("functions", "kernels"),
    "relaxation": ("functions", "couplings", "constants"),
    "minimization": ("operators", "kernels"),
}


def _result(rule_name: str, problems: list[str]) -> RuleResult:
    return RuleResult(rule_name=rule_name, passed=not problems, message="; ".join(problems))


def _expected_primal_dims(doc: ProblemDocument) -> list[int]:
    if doc.kind == "relaxation":
        return doc.spaces.primal[:1]
    return list(doc.spaces.primal)


def _dims_mismatch(label: str, blocks: Optional[list[list[float]]], dims: list[int]) -> list[str]:
    if blocks is None:
        return []
    if len(blocks) != len(dims):
        return [f"{label} has {len(blocks)} blocks, expected {len(dims)}"]
    return [
        f"{label}[{i}] has dimension {len(block)}, expected {d}"
        for i, (block, d) in enumerate(zip(blocks, dims))
        if len(block) != d
    ]


class ProblemRules:
    """Collection of document-level rules; each one inspects a validated document."""

    @staticmethod
    def sections_for_kind(doc: ProblemDocument) -> RuleResult:
        problems = [
            f"kind '{doc.kind}' requires section '{name}'"
            for name in _REQUIRED[doc.kind]
            if getattr(doc, name) is None
        ]
        problems += [
            f"kind '{doc.kind}' does not accept section '{name}'"
            for name in _FORBIDDEN[doc.kind]
            if getattr(doc, name) is not None
        ]
        return _result("sections_for_kind", problems)

    @staticmethod
    def space_dimensions(doc: ProblemDocument) -> RuleResult:
        problems = [
            f"spaces.{side}[{i}] must be positive, got {d}"
            for side in ("primal", "dual")
            for i, d in enumerate(getattr(doc.spaces, side))
            if d <= 0
        ]
        if doc.kind in ("inclusion", "relaxation") and len(doc.spaces.primal) != 1:
            problems.append(f"kind '{doc.kind}' needs exactly one primal space")
        if doc.kind == "inclusion" and len(doc.spaces.dual) != 1:
            problems.append("kind 'inclusion' needs exactly one dual space")
        if doc.kind == "relaxation":
            problems += [
                f"spaces.dual[{k}] must equal the primal dimension {doc.spaces.primal[0]}"
                for k, d in enumerate(doc.spaces.dual)
                if d != doc.spaces.primal[0]
            ]
        return _result("space_dimensions", problems)

    @staticmethod
    def operator_dimensions(doc: ProblemDocument) -> RuleResult:
        problems = []
        if doc.operators is not None:
            expected = {"A": _expected_primal_dims(doc), "B": list(doc.spaces.dual)}
            for name, dims in expected.items():
                entries = getattr(doc.operators, name)
                if len(entries) != len(dims):
                    problems.append(f"operators.{name} has {len(entries)} entries, expected {len(dims)}")
                    continue
                for i, (entry, d) in enumerate(zip(entries, dims)):
                    if operator_dim(entry) != d:
                        problems.append(
                            f"operators.{name}[{i}] ({entry.tag}) acts on dimension {operator_dim(entry)}, expected {d}"
                        )
        if doc.kernels is not None and doc.kind == "relaxation":
            d = doc.spaces.primal[0]
            if len(doc.kernels) != len(doc.spaces.dual):
                problems.append(f"kernels has {len(doc.kernels)} entries, expected {len(doc.spaces.dual)}")
            problems += [
                f"kernels[{k}] ({entry.tag}) acts on dimension {operator_dim(entry)}, expected {d}"
                for k, entry in enumerate(doc.kernels)
                if operator_dim(entry) != d
            ]
        if doc.functions is not None:
            expected = {"f": list(doc.spaces.primal), "g": list(doc.spaces.dual)}
            for name, dims in expected.items():
                entries = getattr(doc.functions, name)
                if len(entries) != len(dims):
                    problems.append(f"functions.{name} has {len(entries)} entries, expected {len(dims)}")
                    continue
                problems += [
                    f"functions.{name}[{i}] ({entry.tag}) acts on dimension {function_dim(entry)}, expected {d}"
                    for i, (entry, d) in enumerate(zip(entries, dims))
                    if function_dim(entry) != d
                ]
        return _result("operator_dimensions", problems)

    @staticmethod
    def coupling_dimensions(doc: ProblemDocument) -> RuleResult:
        if doc.couplings is None:
            return _result("coupling_dimensions", [])
        problems = []
        primal, dual = doc.spaces.primal, doc.spaces.dual
        if len(doc.couplings) != len(dual):
            problems.append(f"couplings has {len(doc.couplings)} rows, expected {len(dual)}")
        for k, row in enumerate(doc.couplings):
            if len(row) != len(primal):
                problems.append(f"couplings row {k} has {len(row)} entries, expected {len(primal)}")
                continue
            for i, entry in enumerate(row):
                if isinstance(entry, DenseCouplingSpec) and len({len(r) for r in entry.rows}) > 1:
                    problems.append(f"couplings row {k}, column {i}: dense rows have different lengths")
                    continue
                domain, codomain = coupling_dims(entry)
                expected_codomain = dual[k] if k < len(dual) else codomain
                if domain != primal[i] or codomain != expected_codomain:
                    problems.append(
                        f"couplings row {k}, column {i}: maps {domain} -> {codomain}, "
                        f"expected {primal[i]} -> {expected_codomain}"
                    )
        return _result("coupling_dimensions", problems)

    @staticmethod
    def constant_dimensions(doc: ProblemDocument) -> RuleResult:
        if doc.constants is None:
            return _result("constant_dimensions", [])
        problems = _dims_mismatch("constants.z", doc.constants.z, list(doc.spaces.primal))
        problems += _dims_mismatch("constants.r", doc.constants.r, list(doc.spaces.dual))
        return _result("constant_dimensions", problems)

    @staticmethod
    def start_dimensions(doc: ProblemDocument) -> RuleResult:
        if doc.start is None:
            return _result("start_dimensions", [])
        problems = _dims_mismatch("start.x", doc.start.x, _expected_primal_dims(doc))
        problems += _dims_mismatch("start.v", doc.start.v, list(doc.spaces.dual))
        return _result("start_dimensions", problems)

    @staticmethod
    def catalog_parameters(doc: ProblemDocument) -> RuleResult:
        """Construct every catalog entry once; construction enforces parameter ranges."""
        problems = []
        entries: list[tuple[str, Callable, object]] = []
        if doc.operators is not None:
            entries += [(f"operators.A[{i}]", build_operator, e) for i, e in enumerate(doc.operators.A)]
            entries += [(f"operators.B[{k}]", build_operator, e) for k, e in enumerate(doc.operators.B)]
        if doc.kernels is not None:
            entries += [(f"kernels[{k}]", build_operator, e) for k, e in enumerate(doc.kernels)]
        if doc.functions is not None:
            entries += [(f"functions.f[{i}]", build_function, e) for i, e in enumerate(doc.functions.f)]
            entries += [(f"functions.g[{k}]", build_function, e) for k, e in enumerate(doc.functions.g)]
        if doc.couplings is not None:
            entries += [
                (f"couplings row {k}, column {i}", build_coupling, e)
                for k, row in enumerate(doc.couplings)
                for i, e in enumerate(row)
            ]
        for label, builder, entry in entries:
            try:
                builder(entry)
            except (KTSolveError, ValueError) as exc:
                problems.append(f"{label}: {exc}")
        return _result("catalog_parameters", problems)


ALL_PROBLEM_RULES = [
    ProblemRules.sections_for_kind,
    ProblemRules.space_dimensions,
    ProblemRules.operator_dimensions,
    ProblemRules.coupling_dimensions,
    ProblemRules.constant_dimensions,
    ProblemRules.start_dimensions,
    ProblemRules.catalog_parameters,
]


def validate_document(doc: ProblemDocument) -> list[RuleResult]:
    return [rule(doc) for rule in ALL_PROBLEM_RULES]


# Loading


@dataclass
class ParsedProblem:
    """
    A validated problem built into solver objects.

    problem is what the solver runs: the inclusion itself, or the lifted
    system for the other kinds.
    """

    document: ProblemDocument
    problem: KTProblem
    system: Optional[SystemProblem] = None
    minimization: Optional[MinimizationSpec] = None

    @property
    def kind(self) -> str:
        return self.document.kind


def load_document(text: str) -> ProblemDocument:
    """
    Parse and validate problem text.

    Raises:
        ProblemParseError: If the text is not valid JSON
        ProblemValidationError: If the schema or any problem rule fails
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc

    try:
        doc = ProblemDocument.model_validate(raw)
    except ValidationError as exc:
        failures = [
            f"{'.'.join(str(part) for part in error['loc']) or '<document>'}: {error['msg']}"
            for error in exc.errors()
        ]
        raise ProblemValidationError(failures) from exc

    failures = []
    for result in validate_document(doc):
        if not result.passed:
            failures.append(f"{result.rule_name}: {result.message}")
    if failures:
        raise ProblemValidationError(failures)
    return doc


def build_problem(doc: ProblemDocument) -> ParsedProblem:
    start_x = doc.start.x if doc.start is not None else None
    start_v = doc.start.v if doc.start is not None else None
    try:
        if doc.kind == "inclusion":
            problem = KTProblem(
                A=build_operator(doc.operators.A[0]),
                B=build_operator(doc.operators.B[0]),
                L=build_coupling(doc.couplings[0][0]),
                x0=start_x[0] if start_x else np.zeros(doc.spaces.primal[0]),
                v0=start_v[0] if start_v else np.zeros(doc.spaces.dual[0]),
            )
            return ParsedProblem(document=doc, problem=problem)

        if doc.kind == "relaxation":
            relaxation = RelaxationSpec(
                A=build_operator(doc.operators.A[0]),
                B=[build_operator(e) for e in doc.operators.B],
                S=[build_operator(e) for e in doc.kernels],
                x0=start_x[0] if start_x else None,
                v0=start_v,
            )
            system = build_relaxation(relaxation)
            return ParsedProblem(document=doc, problem=lift(system), system=system)

        grid = [[build_coupling(e) for e in row] for row in doc.couplings]
        z = doc.constants.z if doc.constants is not None else None
        r = doc.constants.r if doc.constants is not None else None
        if doc.kind == "minimization":
            minimization = MinimizationSpec(
                f=[build_function(e) for e in doc.functions.f],
                g=[build_function(e) for e in doc.functions.g],
                L=grid,
                z=z,
                r=r,
                x0=start_x,
                v0=start_v,
            )
            system = build_minimization(minimization)
            return ParsedProblem(
                document=doc, problem=lift(system), system=system, minimization=minimization
            )

        system = SystemProblem(
            A=[build_operator(e) for e in doc.operators.A],
            B=[build_operator(e) for e in doc.operators.B],
            L=grid,
            z=z,
            r=r,
            x0=start_x,
            v0=start_v,
        )
        return ParsedProblem(document=doc, problem=lift(system), system=system)
    except (KTSolveError, ValueError) as exc:
        raise ProblemValidationError([str(exc)]) from exc


def parse_problem_text(text: str) -> ParsedProblem:
    return build_problem(load_document(text))


def parse_problem(path: str | Path) -> ParsedProblem:
    """
    Read, validate and build a problem file.

    Raises:
        FileNotFoundError: If the file does not exist
        ProblemParseError: If the file is not valid JSON
        ProblemValidationError: If the document fails validation
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Problem file not found: {path}")
    parsed = parse_problem_text(path.read_text(encoding="utf-8"))
    logger.info("Loaded %s problem from %s", parsed.kind, path)
    return parsed


def emit_problem(doc: ProblemDocument) -> str:
    """Canonical text: sorted keys, 2-space indent, shortest round-trip floats."""
    payload = doc.model_dump(by_alias=True, exclude_none=True)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def solver_config(doc: ProblemDocument, **overrides) -> SolverConfig:
    """
    Solver configuration with precedence: overrides (CLI flags) over the
    document's solver section over settings.
    """
    section = doc.solver or SolverSection()
    values = {
        "mode": section.mode,
        "epsilon": section.epsilon,
        "gamma": section.gamma,
        "mu": section.mu,
        "lam": section.lambda_,
        "max_iters": section.max_iters,
        "tau_tol": section.tau_tol,
        "dist_tol": section.dist_tol,
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    mode = values.pop("mode") or "haugazeau"
    return SolverConfig.from_settings(mode=mode, **values)
