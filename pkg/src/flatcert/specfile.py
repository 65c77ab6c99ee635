"""Loader for ``.flat`` spec files.

The format is sectioned ``key = value`` text. ``#`` starts a comment.
Expression lists are separated by ``;``; jets list their levels separated
by ``;`` and the channels of a level by ``,``::

    [system]
    name = double_integrator
    n = 2
    m = 1
    F = p1 - x2
    f = x2; u1

    [flat]
    m = 1
    r = 1
    phi = y0_1; y1_1
    # optional
    guard = y1_1^2 >= 0.01
    psi = x0_1
    psi_order = 0

    [check]
    samples = 100
    seed = 0

    [plan]
    start = 0; 0; 0
    end = 1; 0; 0
    T = 1
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionError, FlatcertError, SpecParseError, UnknownKey
from .expr import SmoothMap
from .jets import Guard, ParameterFunction, jet_names
from .planner import psi_names
from .system import ImplicitSystem, names


@dataclass
class CheckOptions:
    samples: int = 100
    seed: int = 0
    scale: float = 1.0
    tol: float = 1e-8
    tol_rank: float = 1e-8
    tol_inclusion: float = 1e-8
    tol_identity: float = 1e-10
    tol_consistency: float = 1e-9
    eq_points: int = 10
    probe_targets: int = 50
    probe_restarts: int = 5


@dataclass
class PlanOptions:
    start: np.ndarray
    end: np.ndarray
    T: float = 1.0
    degree: int | None = None
    grid: int = 1000
    tol: float = 1e-8


@dataclass
class SpecFile:
    system: ImplicitSystem
    flat: ParameterFunction
    check: CheckOptions = field(default_factory=CheckOptions)
    plan: PlanOptions | None = None
    guard: Guard | None = None
    psi: SmoothMap | None = None
    psi_order: int = 0
    text: str = ""
    source: str = "<string>"

    @property
    def name(self) -> str:
        return self.system.name

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


_SECTIONS: dict[str, set[str]] = {
    "system": {"name", "n", "m", "F", "f"},
    "flat": {"m", "r", "phi", "guard", "psi", "psi_order"},
    "check": {f.name for f in fields(CheckOptions)},
    "plan": {"start", "end", "T", "degree", "grid", "tol"},
}
_REQUIRED = {"system": {"n", "m", "F", "f"}, "flat": {"r", "phi"}}


def _read_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise SpecParseError(f"malformed section header {line!r}", line=lineno)
            current = line[1:-1].strip()
            if current not in _SECTIONS:
                raise UnknownKey(f"unknown section {current!r}", current, lineno)
            if current in sections:
                raise SpecParseError(f"duplicate section [{current}]", current, lineno)
            sections[current] = {}
            continue
        if current is None:
            raise SpecParseError("key outside of any section", line=lineno)
        if "=" not in line:
            raise SpecParseError(f"expected 'key = value', got {line!r}", current, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SECTIONS[current]:
            raise UnknownKey(f"unknown key {current}.{key}", current, lineno)
        if key in sections[current]:
            raise SpecParseError(f"duplicate key {current}.{key}", current, lineno)
        sections[current][key] = (value, lineno)
    for sec, keys in _REQUIRED.items():
        if sec not in sections:
            raise SpecParseError(f"missing section [{sec}]")
        missing = keys - sections[sec].keys()
        if missing:
            raise SpecParseError(f"missing key(s) {', '.join(sorted(missing))}", sec)
    return sections


class _Section:
    def __init__(self, name: str, entries: dict[str, tuple[str, int]]):
        self.name = name
        self.entries = entries

    def has(self, key: str) -> bool:
        return key in self.entries

    def line(self, key: str) -> int | None:
        return self.entries[key][1] if key in self.entries else None

    def convert(self, key: str, kind, default=None):
        if key not in self.entries:
            return default
        value, lineno = self.entries[key]
        try:
            return kind(value)
        except ValueError:
            raise SpecParseError(f"{self.name}.{key}: cannot read {value!r} as {kind.__name__}", self.name, lineno) from None

    def exprs(self, key: str) -> list[str]:
        value, _ = self.entries[key]
        return [part.strip() for part in value.split(";") if part.strip()]

    def jet(self, key: str, levels: int, m: int) -> np.ndarray:
        value, lineno = self.entries[key]
        try:
            rows = [[float(c) for c in level.split(",")] for level in value.split(";")]
        except ValueError:
            raise SpecParseError(f"{self.name}.{key}: jets are numbers, levels split by ';', channels by ','", self.name, lineno) from None
        arr = np.array(rows, dtype=float) if len({len(r) for r in rows}) == 1 else None
        if arr is None or arr.shape != (levels, m):
            raise DimensionError(f"{self.name}.{key} must have {levels} levels of {m} channel(s)", self.name, lineno)
        return arr

    def smooth_map(self, key: str, count: int, ctx: list[str]) -> SmoothMap:
        exprs = self.exprs(key)
        if len(exprs) != count:
            raise DimensionError(f"{self.name}.{key} needs {count} expression(s), got {len(exprs)}", self.name, self.line(key))
        try:
            return SmoothMap(exprs, ctx)
        except FlatcertError as exc:
            raise SpecParseError(f"{self.name}.{key}: {exc}", self.name, self.line(key)) from None


def parse_spec(text: str, source: str = "<string>") -> SpecFile:
    raw = _read_sections(text)
    sec = {name: _Section(name, raw.get(name, {})) for name in _SECTIONS}

    system = sec["system"]
    n = system.convert("n", int)
    m = system.convert("m", int)
    if n is None or m is None or not 0 < m <= n:
        raise DimensionError("need integers 0 < m <= n", "system", system.line("m"))
    F = system.smooth_map("F", n - m, names("x", n) + names("p", n))
    f = system.smooth_map("f", n, names("x", n) + names("u", m))
    sys = ImplicitSystem(n, m, F, f, system.convert("name", str, "") or Path(source).stem)

    flat = sec["flat"]
    fm = flat.convert("m", int, m)
    if fm != m:
        raise DimensionError(f"flat.m = {fm} differs from system.m = {m}", "flat", flat.line("m"))
    r = flat.convert("r", int)
    if r < 0:
        raise DimensionError("flat.r must be >= 0", "flat", flat.line("r"))
    phi = flat.smooth_map("phi", n, jet_names(m, r + 1))
    pf = ParameterFunction(m, n, r, phi)

    guard = None
    if flat.has("guard"):
        try:
            guard = Guard(flat.entries["guard"][0], m, r)
        except FlatcertError as exc:
            raise SpecParseError(f"flat.guard: {exc}", "flat", flat.line("guard")) from None
    psi, psi_order = None, flat.convert("psi_order", int, 0)
    if flat.has("psi"):
        psi = flat.smooth_map("psi", m, psi_names(n, psi_order))

    check = CheckOptions()
    for opt in fields(CheckOptions):
        kind = int if opt.type in ("int", int) else float
        setattr(check, opt.name, sec["check"].convert(opt.name, kind, getattr(check, opt.name)))

    plan = None
    if raw.get("plan"):
        p = sec["plan"]
        for key in ("start", "end"):
            if not p.has(key):
                raise SpecParseError(f"missing key {key}", "plan")
        plan = PlanOptions(
            start=p.jet("start", r + 2, m),
            end=p.jet("end", r + 2, m),
            T=p.convert("T", float, 1.0),
            degree=p.convert("degree", int, None),
            grid=p.convert("grid", int, 1000),
            tol=p.convert("tol", float, 1e-8),
        )
    return SpecFile(sys, pf, check, plan, guard, psi, psi_order, text, source)


def load_spec(path: str | Path) -> SpecFile:
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), str(path))


def options_dict(spec: SpecFile) -> dict[str, Any]:
    return {f.name: getattr(spec.check, f.name) for f in fields(CheckOptions)}
