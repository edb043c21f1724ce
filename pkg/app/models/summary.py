from typing import Optional

from pydantic import BaseModel


class RunSummary(BaseModel):
    problem: str
    kind: str
    mode: str
    status: str
    iterations: int
    tau: Optional[float] = None
    s_norm: Optional[float] = None
    t_norm: Optional[float] = None
    primal_residual: Optional[float] = None
    dual_residual: Optional[float] = None
    distance_moved: float
    x: list[float]
    v: list[float]
    duality_gap: Optional[float] = None
    trace_path: Optional[str] = None
