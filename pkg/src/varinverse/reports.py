from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


class VerificationError(RuntimeError):
    """A constructed object failed its numeric postcondition."""

    def __init__(self, message: str, witness: Optional[dict] = None, residual: float = math.nan):
        super().__init__(message if witness is None else f"{message} (residual {residual:.3g} at {witness})")
        self.witness = witness
        self.residual = residual


@dataclass
class ConditionResult:
    id: str
    passed: bool
    max_residual: float
    witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "pass": bool(self.passed),
            "max_residual": float(self.max_residual),
            "witness": {k: float(v) for k, v in sorted(self.witness.items())},
        }


@dataclass
class ConditionReport:
    """One entry per condition id, in evaluation order."""

    results: list

    def __post_init__(self):
        ids = [r.id for r in self.results]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate condition ids in {ids}")

    def __getitem__(self, cid: str) -> ConditionResult:
        for r in self.results:
            if r.id == cid:
                return r
        raise KeyError(cid)

    def __iter__(self):
        return iter(self.results)

    @property
    def ids(self) -> list:
        return [r.id for r in self.results]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self) -> list:
        return [r.id for r in self.results if not r.passed]

    def to_json(self) -> list:
        return [r.to_json() for r in self.results]

    def summary(self) -> str:
        return "\n".join(
            f"{r.id:10s} {'pass' if r.passed else 'FAIL'}  max residual {r.max_residual:.3e}" for r in self.results
        )
