"""
Run service tying a problem file to a solve.

The workflow:
1. Parse and validate the problem file
2. Resolve the solver configuration (flags over file over settings)
3. Solve in the configured mode
4. Write the trace, if requested
5. Build the summary, with the duality gap for minimization problems
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from app.core.errors import NonFiniteError
from app.models.summary import RunSummary
from app.services.ktsolver import SolveResult, SolveStatus, run
from app.services.problem_service import ParsedProblem, parse_problem, solver_config
from app.services.space import norm_sq
from app.services.systems import duality_gap
from app.services.trace_service import write_trace

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    parsed: ParsedProblem
    result: SolveResult
    summary: RunSummary

    @property
    def exit_code(self) -> int:
        return 0 if self.result.status.is_success else 1


class RunService:
    """Service for solving problem files end to end."""

    def run_file(
        self,
        problem_path: str | Path,
        overrides: Optional[dict] = None,
        trace_path: Optional[str | Path] = None,
        summary_path: Optional[str | Path] = None,
    ) -> RunOutcome:
        """
        Solve a problem file.

        Args:
            problem_path: Path to the JSON problem file
            overrides: Solver values taking precedence over the file (None entries ignored)
            trace_path: Where to write the trace (CSV, or Parquet for .parquet)
            summary_path: Where to write the JSON summary

        Returns:
            RunOutcome with the solve result and its summary

        Raises:
            FileNotFoundError: If the problem file does not exist
            ProblemParseError: If the file is not valid JSON
            ProblemValidationError: If the document fails validation
            ParameterError: If a solver value is out of range
            NonFiniteError: If the iteration produced NaN or Inf; the records
                before the failure are still written to trace_path
        """
        parsed = parse_problem(problem_path)
        cfg = solver_config(parsed.document, **(overrides or {}))
        try:
            result = run(parsed.problem, cfg)
        except NonFiniteError as exc:
            if trace_path is not None and exc.trace is not None:
                write_trace(exc.trace, trace_path)
                logger.warning("Partial trace of %s written to %s", problem_path, trace_path)
            raise

        if trace_path is not None:
            write_trace(result.trace, trace_path)

        summary = self.summarize(parsed, result, str(problem_path), cfg.mode.value, trace_path)
        if summary_path is not None:
            Path(summary_path).write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
            logger.info("Wrote summary to %s", summary_path)

        if result.status is SolveStatus.BREAKDOWN:
            logger.warning("Solve of %s broke down after %d iterations", problem_path, result.iterations)
        return RunOutcome(parsed=parsed, result=result, summary=summary)

    @staticmethod
    def summarize(
        parsed: ParsedProblem,
        result: SolveResult,
        problem_label: str,
        mode: str,
        trace_path: Optional[str | Path] = None,
    ) -> RunSummary:
        problem = parsed.problem
        dx = result.x - problem.x0
        dv = result.v - problem.v0
        last = result.trace.records[-1] if result.trace.records else None

        gap = None
        if parsed.minimization is not None:
            system = parsed.system
            gap = duality_gap(
                parsed.minimization,
                list(system.x_signature.split(result.x)),
                list(system.v_signature.split(result.v)),
            )
            if not math.isfinite(gap):
                gap = None

        return RunSummary(
            problem=problem_label,
            kind=parsed.kind,
            mode=mode,
            status=result.status.value,
            iterations=result.iterations,
            tau=last.tau if last else None,
            s_norm=last.s_norm if last else None,
            t_norm=last.t_norm if last else None,
            primal_residual=last.primal_residual if last else None,
            dual_residual=last.dual_residual if last else None,
            distance_moved=math.sqrt(norm_sq(dx) + norm_sq(dv)),
            x=result.x.tolist(),
            v=result.v.tolist(),
            duality_gap=gap,
            trace_path=str(trace_path) if trace_path is not None else None,
        )
