"""Check and report records shared by every verifier."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

# Witness lists are truncated to keep reports readable.
MAX_WITNESSES = 20


@dataclass
class Check:
    """Result of a single verification check."""

    name: str
    passed: bool
    message: str
    details: dict[str, Any] | None = None


@dataclass
class Report:
    """Aggregate result of one check family (net, T, D, B)."""

    family: str
    passed: bool
    checks: list[Check] = field(default_factory=list)
    certificates: dict[str, Any] = field(default_factory=dict)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> Report:
        return cls(
            family=raw["family"],
            passed=raw["passed"],
            checks=[Check(**c) for c in raw.get("checks", [])],
            certificates=raw.get("certificates", {}),
        )


def build_report(
    family: str,
    checks: list[Check],
    certificates: dict[str, Any] | None = None,
) -> Report:
    return Report(
        family=family,
        passed=all(c.passed for c in checks),
        checks=checks,
        certificates=certificates or {},
    )


def make_check(
    name: str,
    violations: list[Any],
    ok_message: str,
    fail_message: str,
    **details: Any,
) -> Check:
    """Turn a violation list into a Check, keeping the first witnesses."""
    passed = not violations
    payload = dict(details)
    payload["violations"] = len(violations)
    if violations:
        payload["witnesses"] = violations[:MAX_WITNESSES]
    return Check(
        name=name,
        passed=passed,
        message=ok_message if passed else f"{fail_message} ({len(violations)} violations)",
        details=payload,
    )
