"""Check records, suite reports and their text / structured renderings."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    id: str
    kind: str
    anchor: str
    status: str  # "pass", "fail" or "error"
    max_residual: float
    sample_count: int
    tolerance: float
    residuals: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class Report:
    scenario: str
    seed: int
    sample_count: int
    tol_alg: float
    tol_ode: float
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self, include_timing: bool = False) -> dict:
        checks = []
        for r in self.records:
            item = {
                "id": r.id,
                "kind": r.kind,
                "anchor": r.anchor,
                "status": r.status,
                "max_residual": _num(r.max_residual),
                "sample_count": r.sample_count,
                "tolerance": _num(r.tolerance),
                "residuals": {k: _num(v) for k, v in r.residuals.items()},
                "notes": list(r.notes),
            }
            if include_timing:
                item["elapsed_s"] = round(r.elapsed, 6)
            checks.append(item)
        n_pass = sum(r.passed for r in self.records)
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "tolerances": {"tol_alg": self.tol_alg, "tol_ode": self.tol_ode},
            "checks": checks,
            "summary": {
                "total": len(self.records),
                "passed": n_pass,
                "failed": len(self.records) - n_pass,
                "verdict": "pass" if self.passed else "fail",
            },
        }


def _num(v):
    """JSON-safe number: non-finite values become strings."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def emit_report(report: Report, fmt: str = "text", include_timing: bool = False) -> str:
    """Render a report as human-readable text or a structured JSON document."""
    if fmt == "structured":
        return json.dumps(report.to_dict(include_timing), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"bundlemorph report: {report.scenario} (seed {report.seed}, {report.sample_count} samples, "
             f"tol_alg {report.tol_alg:g}, tol_ode {report.tol_ode:g})"]
    for r in report.records:
        line = (f"[{r.status.upper():5}] {r.id}: {r.anchor} -- max residual {r.max_residual:.3e} "
                f"(tol {r.tolerance:g}, {r.sample_count} samples)")
        if include_timing:
            line += f" [{r.elapsed:.3f} s]"
        lines.append(line)
        for k in sorted(r.residuals):
            lines.append(f"         {k}: {r.residuals[k]:.3e}")
        for note in r.notes:
            lines.append(f"         note: {note}")
    n_pass = sum(r.passed for r in report.records)
    lines.append(f"{len(report.records)} checks: {n_pass} passed, {len(report.records) - n_pass} failed")
    lines.append(f"verdict: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


__all__ = ["CheckRecord", "Report", "emit_report"]
