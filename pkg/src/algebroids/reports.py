"""Machine-readable check records and verification reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    """One named residual check against a tolerance."""

    name: str
    residual: float
    tolerance: float
    probes: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        record = {
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "probes": self.probes,
        }
        if self.details:
            record["details"] = self.details
        return record


@dataclass
class Report:
    """Deterministic report for a fixture run; serialization is byte-stable."""

    tool_version: str
    fixture: str
    seed: int
    points: int
    checks: list[CheckRecord] = field(default_factory=list)
    forms: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.checks.append(record)
        return record

    def to_dict(self) -> dict:
        body = {
            "tool_version": self.tool_version,
            "fixture": self.fixture,
            "seed": self.seed,
            "points": self.points,
            "passed": self.passed,
            "checks": [c.to_dict() for c in sorted(self.checks, key=lambda c: c.name)],
        }
        if self.forms:
            body["forms"] = self.forms
        return body

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)
