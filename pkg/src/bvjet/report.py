"""Check reports: ordered pass/fail records with rendered witnesses."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    witness: str = ""
    detail: str = ""
    runtime: float = 0.0
    terms: list = field(default_factory=list)

    def as_dict(self, timing: bool = False) -> dict:
        d = {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "witness": self.witness,
        }
        if self.terms:
            d["terms"] = self.terms
        if timing:
            d["runtime_ms"] = round(self.runtime * 1000, 3)
        return d


@dataclass
class CheckReport:
    checks: list = field(default_factory=list)
    deviations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, other: "CheckReport") -> "CheckReport":
        self.checks.extend(other.checks)
        for d in other.deviations:
            if d not in self.deviations:
                self.deviations.append(d)
        return self

    def deviate(self, note: str):
        if note not in self.deviations:
            self.deviations.append(note)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list:
        return [c.name for c in self.checks]

    def render_text(self, full: bool = False, header: list | None = None) -> str:
        lines = list(header or [])
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            line = f"[{tag}] {c.name}"
            if c.detail:
                line += f": {c.detail}"
            lines.append(line)
            if c.witness and (full or not c.passed):
                lines.append(f"    witness: {c.witness}")
            if full:
                for t in c.terms:
                    lines.append("    term: " + ", ".join(f"{k}={v}" for k, v in t.items()))
        if self.deviations:
            lines.append("deviations:")
            for d in self.deviations:
                lines.append(f"  - {d}")
        n_pass = sum(c.passed for c in self.checks)
        lines.append(f"summary: {n_pass}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"

    def render_structured(self, model: dict, command: str, runtime_ms=None,
                          full: bool = False, timing: bool = False) -> str:
        checks = []
        for c in self.checks:
            d = c.as_dict(timing=timing)
            if not full:
                d.pop("terms", None)
                if c.passed:
                    d["witness"] = ""
            checks.append(d)
        doc = {
            "model": model,
            "command": command,
            "checks": checks,
            "deviations": list(self.deviations),
            "runtime_ms": runtime_ms,
        }
        return json.dumps(doc, indent=2) + "\n"
