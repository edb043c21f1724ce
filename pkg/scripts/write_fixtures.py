"""
Regenerate the canonical problem fixtures under tests/fixtures.

Each fixture is built from the pydantic problem models and written with
emit_problem, so the stored text is exactly what the loader re-emits.
bad.json is hand-written and left alone.
"""

import math
from pathlib import Path

from app.models.problem import (
    AffineOperatorSpec,
    BoxNormalConeSpec,
    DenseCouplingSpec,
    FunctionsSection,
    IdentityCouplingSpec,
    L1NormSpec,
    OperatorsSection,
    ProblemDocument,
    ScaledIdentitySpec,
    SolverSection,
    Spaces,
    SquaredDistanceSpec,
    Start,
    ZeroOperatorSpec,
)
from app.services.problem_service import emit_problem, load_document

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def _box(lower: float, upper: float) -> BoxNormalConeSpec:
    return BoxNormalConeSpec(tag="box_normal_cone", lower=[lower], upper=[upper])


def _identity() -> IdentityCouplingSpec:
    return IdentityCouplingSpec(tag="identity", dim=1)


def fixture_documents() -> dict[str, ProblemDocument]:
    """Every generated fixture, keyed by file name."""
    scalar = Spaces(primal=[1], dual=[1])
    return {
        "interval.json": ProblemDocument(
            kind="inclusion",
            spaces=scalar,
            operators=OperatorsSection(A=[_box(0.0, 1.0)], B=[_box(1.0, 2.0)]),
            couplings=[[_identity()]],
            start=Start(x=[[3.0]], v=[[0.5]]),
        ),
        # Dense row of the wrong width: rejected by the coupling rule
        "row_mismatch.json": ProblemDocument(
            kind="inclusion",
            spaces=scalar,
            operators=OperatorsSection(
                A=[ZeroOperatorSpec(tag="zero", dim=1)],
                B=[ZeroOperatorSpec(tag="zero", dim=1)],
            ),
            couplings=[[DenseCouplingSpec(tag="dense", rows=[[1.0, 2.0]])]],
        ),
        "affine.json": ProblemDocument(
            kind="inclusion",
            spaces=Spaces(primal=[2], dual=[1]),
            operators=OperatorsSection(
                A=[AffineOperatorSpec(tag="affine", matrix=[[2.0, 0.0], [0.0, 1.0]], offset=[1.0, -1.0])],
                B=[AffineOperatorSpec(tag="affine", matrix=[[1.0]])],
            ),
            couplings=[[DenseCouplingSpec(tag="dense", rows=[[1.0, 1.0]])]],
            start=Start(x=[[0.5, 2.0]], v=[[1.0]]),
            solver=SolverSection(max_iters=20000),
        ),
        "system.json": ProblemDocument(
            kind="system",
            spaces=Spaces(primal=[1, 1], dual=[1]),
            operators=OperatorsSection(A=[_box(0.0, 1.0), _box(0.0, 1.0)], B=[_box(2.0, math.inf)]),
            couplings=[[_identity(), _identity()]],
            start=Start(x=[[3.0], [-1.0]], v=[[0.7]]),
            solver=SolverSection(gamma=0.2, mu=0.2, max_iters=20000),
        ),
        "relaxation.json": ProblemDocument(
            kind="relaxation",
            spaces=scalar,
            operators=OperatorsSection(A=[_box(0.0, 1.0)], B=[_box(3.0, 4.0)]),
            kernels=[ScaledIdentitySpec(tag="scaled_identity", dim=1, rho=1.0)],
            start=Start(x=[[5.0]]),
            solver=SolverSection(gamma=0.2, mu=0.1, max_iters=20000),
        ),
        "minimization.json": ProblemDocument(
            kind="minimization",
            spaces=scalar,
            functions=FunctionsSection(
                f=[SquaredDistanceSpec(tag="squared_distance", anchor=[0.0])],
                g=[L1NormSpec(tag="l1", dim=1, weight=1.0)],
            ),
            couplings=[[_identity()]],
            start=Start(x=[[0.5]], v=[[-0.5]]),
        ),
    }


def write_fixtures():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for name, doc in fixture_documents().items():
        text = emit_problem(doc)
        if name != "row_mismatch.json":
            # Must survive its own loader
            load_document(text)
        (FIXTURES / name).write_text(text, encoding="utf-8")
        print(f"✓ Wrote {name}")


if __name__ == "__main__":
    write_fixtures()
