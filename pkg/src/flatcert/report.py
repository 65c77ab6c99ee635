"""Check blocks, the aggregate report, and their JSON/text serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__

SCHEMA_VERSION = "flatcert.report.v1"

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

SATISFIED = "CRITERION SATISFIED"
FAILED = "CRITERION FAILED"
UNDECIDED = "INCONCLUSIVE"


@dataclass
class Block:
    """Outcome of one check: status, numeric evidence and a one-line verdict."""

    name: str
    status: str
    mandatory: bool = True
    evidence: dict[str, Any] = field(default_factory=dict)
    verdict: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "mandatory": self.mandatory,
            "evidence": jsonable(self.evidence),
            "verdict": self.verdict,
        }


def overall_verdict(blocks: list[Block]) -> str:
    mandatory = [b for b in blocks if b.mandatory]
    if any(b.status == FAIL for b in mandatory):
        return FAILED
    if any(b.status == INCONCLUSIVE for b in mandatory):
        return UNDECIDED
    return SATISFIED


EXIT_CODES = {SATISFIED: 0, FAILED: 1, UNDECIDED: 3}


@dataclass
class CheckReport:
    blocks: list[Block]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return overall_verdict(self.blocks)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "tool": {"name": "flatcert", "version": __version__},
            "meta": jsonable(self.meta),
            "blocks": [b.to_dict() for b in self.blocks],
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render_text(self) -> str:
        width = max([len(b.name) for b in self.blocks] + [5])
        lines = [f"{'block'.ljust(width)}  {'status':<12}  kind       verdict"]
        for b in self.blocks:
            kind = "mandatory" if b.mandatory else "info"
            lines.append(f"{b.name.ljust(width)}  {b.status.upper():<12}  {kind:<9}  {b.verdict}")
        lines.append("")
        lines.append(f"overall: {self.verdict}")
        return "\n".join(lines)


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays to plain JSON types; non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj
