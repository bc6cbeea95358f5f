"""Trace and summary persistence with atomic writes."""
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

from .models import IterationRecord, SolveOutcome
from .utils import format_float

logger = logging.getLogger(__name__)

TRACE_HEADER = ["k", "u", "alpha", "beta", "stage", "step_norm", "inner"]


def trace_rows(trace: list[IterationRecord]) -> list[list[str]]:
    """One row per accepted iteration; ``inner`` is cumulative."""
    rows = []
    inner = 0
    for record in trace:
        inner += record.inner_reductions
        rows.append([
            str(record.k),
            format_float(record.u),
            format_float(record.alpha),
            format_float(record.beta),
            record.stage.value,
            format_float(record.step_norm),
            str(inner),
        ])
    return rows


def render_trace(trace: list[IterationRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    writer.writerows(trace_rows(trace))
    return buffer.getvalue()


def outcome_summary(outcome: SolveOutcome, **extra: Any) -> dict[str, Any]:
    summary = {
        "status": outcome.status.value,
        "iterations": outcome.iterations,
        "stage1_count": outcome.stage1_count,
        "inner_reductions": outcome.total_inner_reductions,
        "final_residual": outcome.final_residual,
        "stop_tol": outcome.stop_tol,
    }
    if outcome.message:
        summary["message"] = outcome.message
    summary.update(extra)
    return summary


class ResultWriter:
    """Writes result files into one directory using temp file + rename."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def _write_atomic(self, name: str, content: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        target = self.out_dir / name
        # Temp file in the same directory so the rename stays on one filesystem
        temp_fd, temp_path = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}_", suffix=".tmp")
        try:
            with os.fdopen(temp_fd, "w", newline="") as f:
                f.write(content)
            os.replace(temp_path, target)
            logger.debug(f"Wrote {target}")
        except Exception as e:
            if os.path.exists(temp_path):
                os.unlink(temp_path)
            raise RuntimeError(f"Failed to write {target}: {e}")
        return target

    def write_trace(self, name: str, trace: list[IterationRecord]) -> Path:
        return self._write_atomic(name, render_trace(trace))

    def write_json(self, name: str, data: dict[str, Any]) -> Path:
        return self._write_atomic(name, json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
