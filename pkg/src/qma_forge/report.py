"""Structured experiment reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckResult:
    name: str
    measured: Any
    expected: Any
    tolerance: float | None
    passed: bool
    claim: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "measured": _clean(self.measured),
            "expected": _clean(self.expected),
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "claim": self.claim,
        }


def check_close(name: str, measured: float, expected: float, tol: float, claim: str = "") -> CheckResult:
    return CheckResult(name, float(measured), float(expected), tol, bool(abs(measured - expected) <= tol), claim)


def check_at_most(name: str, measured: float, bound: float, tol: float = 0.0, claim: str = "") -> CheckResult:
    return CheckResult(name, float(measured), f"<= {bound!r}", tol, bool(measured <= bound + tol), claim)


def check_at_least(name: str, measured: float, bound: float, tol: float = 0.0, claim: str = "") -> CheckResult:
    return CheckResult(name, float(measured), f">= {bound!r}", tol, bool(measured >= bound - tol), claim)


def check_true(name: str, value: bool, claim: str = "") -> CheckResult:
    return CheckResult(name, bool(value), True, None, bool(value), claim)


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if hasattr(x, "item"):
        return x.item()
    return x


@dataclass
class ExperimentReport:
    subcommand: str
    config: dict
    seed: int
    claim: str
    results: list[CheckResult] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "claim": self.claim,
            "config": self.config,
            "seed": self.seed,
            "pass": self.passed,
            "n_checks": len(self.results),
            "n_failed": sum(not r.passed for r in self.results),
            "results": [r.to_json() for r in self.results],
            "extra": self.extra,
            "wall_time": self.wall_time,
        }
