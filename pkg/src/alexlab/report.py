"""Structured outcome of a batch check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

NO_VIOLATION = "no violation found"
VIOLATION = "violations found"
INCONCLUSIVE = "inconclusive"
EXCLUDED = "domain excluded"


@dataclass
class VerificationReport:
    """Items tested, violations, worst margin and the tolerance used.

    A positive outcome of a sampling check is labelled ``"no violation
    found"``: sampling can refute an inequality but never certify it.
    ``worst_margin`` is the smallest signed slack over all tested items
    (negative means at least one item broke the inequality).
    """

    pipeline: str
    items_tested: int = 0
    violations: list[dict[str, Any]] = field(default_factory=list)
    worst_margin: float = math.inf
    tolerance: float = 0.0
    verdict: str = NO_VIOLATION
    warnings: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == NO_VIOLATION

    def finalize(self) -> "VerificationReport":
        """Set the verdict from the collected violations (keeps INCONCLUSIVE/EXCLUDED)."""
        if self.verdict in (INCONCLUSIVE, EXCLUDED):
            return self
        self.verdict = VIOLATION if self.violations else NO_VIOLATION
        return self

    def to_dict(self, max_violations: int | None = 50) -> dict[str, Any]:
        viol = self.violations if max_violations is None else self.violations[:max_violations]
        return {
            "pipeline": self.pipeline,
            "items_tested": int(self.items_tested),
            "violation_count": len(self.violations),
            "violations": [_jsonable(v) for v in viol],
            "worst_margin": _num(self.worst_margin),
            "tolerance": _num(self.tolerance),
            "verdict": self.verdict,
            "warnings": list(self.warnings),
            "details": _jsonable(self.details),
        }


def _num(x):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
