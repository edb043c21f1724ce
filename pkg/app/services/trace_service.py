"""
Trace files: one row per iteration, fixed header.

CSV traces use 17 significant digits and "\n" line endings so two runs of
the same problem give byte-identical files. A path ending in .parquet
writes the same table through pyarrow instead.
"""

import logging
from pathlib import Path

import pandas as pd

from app.services.ktsolver import IterationTrace

logger = logging.getLogger(__name__)

TRACE_FLOAT_FORMAT = "%.17g"


def write_trace(trace: IterationTrace, path: str | Path) -> Path:
    """
    Write a trace to CSV or Parquet depending on the suffix.

    Args:
        trace: Iteration trace of a finished solve
        path: Destination; ".parquet" selects Parquet, anything else CSV

    Returns:
        The path written
    """
    path = Path(path)
    frame = trace.to_frame()
    if path.suffix == ".parquet":
        frame.to_parquet(path, engine="pyarrow", index=False)
    else:
        frame.to_csv(path, index=False, float_format=TRACE_FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %d trace rows to %s", len(frame), path)
    return path


def read_trace(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Trace file not found: {path}")
    if path.suffix == ".parquet":
        return pd.read_parquet(path, engine="pyarrow")
    return pd.read_csv(path, float_precision="round_trip")
