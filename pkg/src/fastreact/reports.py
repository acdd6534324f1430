from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CheckReport:
    """Verdict of one numerical inequality check.

    ``worst_margin`` is the minimum slack of the required inequality over
    every checked point; the check passes iff it is ``>= -tolerance`` (or
    strictly greater when ``strict``). A skipped check records why in
    ``details`` and counts as neither pass nor failure.
    """

    name: str
    worst_margin: float
    tolerance: float = 0.0
    tolerance_source: str = "exact"
    worst_location: tuple = (None, None)
    details: str = ""
    strict: bool = False
    skipped: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        if self.strict:
            return self.worst_margin > -self.tolerance
        return self.worst_margin >= -self.tolerance

    @property
    def status(self) -> str:
        if self.skipped:
            return "skipped"
        return "pass" if self.passed else "fail"

    def line(self) -> str:
        node, t = self.worst_location
        loc = f"node={node} t={t!r}" if node is not None else "-"
        return (
            f"{self.status.upper():7s} {self.name:32s} margin={self.worst_margin:.6e} "
            f"tol={self.tolerance:.3e} ({self.tolerance_source}) at {loc}"
            + (f" | {self.details}" if self.details else "")
        )

    @classmethod
    def skip(cls, name: str, reason: str, **extra) -> "CheckReport":
        return cls(name, float("nan"), details=reason, skipped=True, extra=extra)


def worst_point(margin, times=None) -> tuple:
    """(min value, (node, time)) of a margin array shaped (samples, nodes) or (nodes,)."""
    import numpy as np

    margin = np.asarray(margin, dtype=float)
    if margin.size == 0:
        return float("inf"), (None, None)
    flat = int(np.argmin(margin))
    if margin.ndim == 1:
        t = None if times is None else float(times)
        return float(margin[flat]), (flat, t)
    s, node = np.unravel_index(flat, margin.shape)
    t = None if times is None else float(np.asarray(times)[s])
    return float(margin[s, node]), (int(node), t)


def summarize(reports, header: Optional[str] = None) -> str:
    lines = [header] if header else []
    lines.extend(r.line() for r in reports)
    return "\n".join(lines)
