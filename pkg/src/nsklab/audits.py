"""Audit reports: one record per checked inequality, CSV-serializable.

An audit compares a computed left-hand side against a right-hand side at a
declared tolerance; two-sided (equivalence) checks are encoded by putting the
worst-case side ratio on the left and the admissible constant on the right,
so the single invariant ``passed == (lhs <= rhs * (1 + tolerance))`` holds
for every report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AuditReport", "bound_report", "identity_report", "audit_csv_lines"]

CSV_HEADER = "inequality_id,lhs,rhs,ratio,tolerance,pass,citation"


@dataclass(frozen=True)
class AuditReport:
    inequality_id: str
    lhs: float
    rhs: float
    ratio: float
    tolerance: float
    passed: bool
    citation: str

    def csv_row(self) -> str:
        cols = [
            self.inequality_id,
            f"{self.lhs:.17g}",
            f"{self.rhs:.17g}",
            f"{self.ratio:.17g}",
            f"{self.tolerance:.17g}",
            "true" if self.passed else "false",
            self.citation,
        ]
        return ",".join(cols)


def bound_report(inequality_id, lhs, rhs, tolerance, citation) -> AuditReport:
    """lhs <= rhs up to relative tolerance; ratio is lhs/rhs (0 when vacuous)."""
    lhs, rhs = float(lhs), float(rhs)
    ratio = lhs / rhs if rhs != 0.0 else (0.0 if lhs == 0.0 else np.inf)
    passed = bool(lhs <= rhs * (1.0 + tolerance) + np.finfo(float).tiny)
    return AuditReport(inequality_id, lhs, rhs, ratio, tolerance, passed, citation)


def identity_report(inequality_id, lhs, rhs, tolerance, citation, floor=0.0) -> AuditReport:
    """lhs == rhs up to relative tolerance (scaled by the larger side)."""
    lhs, rhs = float(lhs), float(rhs)
    scale = max(abs(lhs), abs(rhs), floor)
    err = abs(lhs - rhs)
    ratio = err / scale if scale > 0 else 0.0
    passed = bool(err <= tolerance * scale + np.finfo(float).tiny)
    return AuditReport(inequality_id, lhs, rhs, ratio, tolerance, passed, citation)


def audit_csv_lines(reports) -> list[str]:
    return [CSV_HEADER] + [r.csv_row() for r in reports]
