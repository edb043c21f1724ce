"""
Error types raised by the solver, the operator catalog and the problem-file layer.

Value-type errors subclass ValueError so callers can keep catching ValueError
the way the service layer always has.
"""

from typing import Any, Optional


class KTSolveError(Exception):
    """Base class for every error raised by this package."""


class SignatureError(KTSolveError, ValueError):
    """Vectors or maps whose space signatures do not match."""


class ParameterError(KTSolveError, ValueError):
    """A scalar parameter or schedule value outside its admissible range."""


class NonFiniteError(KTSolveError, ValueError):
    """NaN or Inf reached an iterate, an operator output or an input vector."""

    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace


class EmptyIntersectionError(KTSolveError):
    """
    The two half-spaces handed to the Q projector do not intersect.

    Carries the QScalars that classified the triplet so the breakdown can be
    reported without recomputing anything.
    """

    def __init__(self, scalars: Any):
        super().__init__(
            "Half-space intersection is empty: "
            f"q_chi={scalars.q_chi!r}, q_mu={scalars.q_mu!r}, "
            f"q_nu={scalars.q_nu!r}, q_rho={scalars.q_rho!r}"
        )
        self.scalars = scalars


class UnsupportedOracleError(KTSolveError):
    """The projection oracle does not cover this problem class."""


class ProblemParseError(KTSolveError, ValueError):
    """Problem text that is not well-formed."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ProblemValidationError(KTSolveError, ValueError):
    """A problem document that failed one or more validation rules."""

    def __init__(self, failures: list[str]):
        listing = "\n".join(f"  - {failure}" for failure in failures)
        super().__init__(f"Problem validation failed with {len(failures)} error(s):\n{listing}")
        self.failures = failures
