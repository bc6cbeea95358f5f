"""Failure bookkeeping for sweeps and multi-run commands."""
import logging
from collections import defaultdict
from datetime import datetime
from typing import Any, Optional

from .models import SolveOutcome, SolveStatus

logger = logging.getLogger(__name__)


class RunDiagnostics:
    """Collects failed runs and exceptions so a sweep can report them."""

    def __init__(self, pattern_threshold: int = 2):
        self.pattern_threshold = pattern_threshold
        self.failures: list[dict[str, Any]] = []
        self.failure_patterns: dict[str, int] = defaultdict(int)
        self.runs_by_label: dict[str, int] = defaultdict(int)

    def record_outcome(self, label: str, outcome: SolveOutcome,
                       context: Optional[dict[str, Any]] = None) -> bool:
        """Record a solver run; returns True when it converged."""
        self.runs_by_label[label] += 1
        if outcome.status is SolveStatus.CONVERGED:
            return True
        self._record(label, outcome.status.value, outcome.message, context)
        return False

    def record_error(self, label: str, error: Exception,
                     context: Optional[dict[str, Any]] = None):
        self.runs_by_label[label] += 1
        self._record(label, type(error).__name__, str(error), context)

    def _record(self, label: str, kind: str, message: str, context: Optional[dict[str, Any]]):
        self.failures.append({
            "timestamp": datetime.now().isoformat(),
            "label": label,
            "kind": kind,
            "message": message,
            "context": dict(context or {}),
        })
        self.failure_patterns[f"{label}:{kind}"] += 1
        logger.warning(f"{label} failed: {kind} {message}".rstrip())

    @property
    def failure_count(self) -> int:
        return len(self.failures)

    def summary(self) -> dict[str, Any]:
        by_kind: dict[str, int] = defaultdict(int)
        by_label: dict[str, int] = defaultdict(int)
        for failure in self.failures:
            by_kind[failure["kind"]] += 1
            by_label[failure["label"]] += 1
        return {
            "total_runs": sum(self.runs_by_label.values()),
            "total_failures": len(self.failures),
            "failures_by_kind": dict(by_kind),
            "failures_by_label": dict(by_label),
        }

    def detect_patterns(self) -> list[dict[str, Any]]:
        """Failure kinds seen repeatedly under one label."""
        patterns = []
        for key, count in self.failure_patterns.items():
            if count >= self.pattern_threshold:
                label, kind = key.split(":", 1)
                patterns.append({
                    "label": label,
                    "kind": kind,
                    "count": count,
                    "severity": "high" if count >= 5 else "medium",
                })
        return patterns
