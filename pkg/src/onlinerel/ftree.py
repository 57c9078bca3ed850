"""Fault tree model: domain types, a line-oriented DSL parser and validation.

Model files look like::

    # blade subsystem
    event BE1 "Fatigue of blade root" p=0.0830
    event BE2 "Blade erosion" p=0.0458
    gate G1 OR BE1 BE2
    top G1

Ids of events and gates share one namespace. Gates take two or more inputs,
which may reference events or gates defined anywhere in the file.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

__all__ = [
    "BasicEvent",
    "Gate",
    "FaultTree",
    "Diagnostic",
    "ModelError",
    "parse_model",
    "validate",
    "canonicalize",
    "fingerprint",
    "natural_key",
]

GATE_KINDS = ("AND", "OR")

_ID_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.:\-]*")
_FLOAT_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


def natural_key(ident: str) -> tuple:
    """Sort key that orders ``BE2`` before ``BE10``."""
    return tuple(
        (0, int(part), "") if part.isdigit() else (1, 0, part)
        for part in re.split(r"(\d+)", ident)
        if part
    )


@dataclass(frozen=True)
class BasicEvent:
    id: str
    name: str
    prior: float


@dataclass(frozen=True)
class Gate:
    id: str
    kind: str
    inputs: tuple[str, ...]


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    id: str | None
    message: str
    line: int | None = None
    column: int | None = None

    def to_dict(self) -> dict:
        d = {"severity": self.severity, "id": self.id, "message": self.message}
        if self.line is not None:
            d["line"] = self.line
            d["column"] = self.column
        return d

    def __str__(self) -> str:
        where = f"{self.line}:{self.column}: " if self.line is not None else ""
        target = f"[{self.id}] " if self.id else ""
        return f"{where}{self.severity}: {target}{self.message}"


class ModelError(ValueError):
    """Raised when a model cannot be parsed or fails validation."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = [d for d in diagnostics]
        errors = [d for d in self.diagnostics if d.severity == "error"]
        super().__init__("; ".join(str(d) for d in errors) or "invalid model")


@dataclass(frozen=True, eq=True)
class FaultTree:
    """Immutable fault tree.

    Equality is structural: event and gate collections compare as mappings,
    so definition order in the source file does not matter.
    """

    events: Mapping[str, BasicEvent] = field(default_factory=dict)
    gates: Mapping[str, Gate] = field(default_factory=dict)
    top: str = ""

    @classmethod
    def build(cls, events: Iterable[BasicEvent], gates: Iterable[Gate], top: str) -> "FaultTree":
        return cls({e.id: e for e in events}, {g.id: g for g in gates}, top)

    __hash__ = None  # type: ignore[assignment]

    def prior(self, event_id: str) -> float:
        return self.events[event_id].prior

    def with_priors(self, priors: Mapping[str, float]) -> "FaultTree":
        """Copy of the tree with some event priors replaced."""
        events = dict(self.events)
        for eid, p in priors.items():
            if eid not in events:
                raise KeyError(eid)
            events[eid] = replace(events[eid], prior=float(p))
        return FaultTree(events, dict(self.gates), self.top)

    def topological_gates(self) -> list[Gate]:
        """Gates ordered so every gate follows all of its gate inputs.

        Ties are broken by natural id order, which makes the result
        deterministic. Assumes the gate graph is acyclic.
        """
        indeg = {gid: 0 for gid in self.gates}
        users: dict[str, list[str]] = {gid: [] for gid in self.gates}
        for g in self.gates.values():
            for ref in set(g.inputs):
                if ref in self.gates:
                    indeg[g.id] += 1
                    users[ref].append(g.id)
        ready = sorted((gid for gid, d in indeg.items() if d == 0), key=natural_key)
        order: list[Gate] = []
        while ready:
            gid = ready.pop(0)
            order.append(self.gates[gid])
            for u in users[gid]:
                indeg[u] -= 1
                if indeg[u] == 0:
                    ready.append(u)
            ready.sort(key=natural_key)
        return order


# --------------------------------------------------------------------------
# parsing


class _Line:
    """Tokenizer for a single DSL line with 1-based column tracking."""

    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\f\v":
            self.pos += 1

    @property
    def col(self) -> int:
        return self.pos + 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text) or self.text[self.pos] == "#"

    def error(self, message: str, ident: str | None = None) -> Diagnostic:
        return Diagnostic("error", ident, message, self.lineno, self.col)

    def word(self) -> str | None:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and not self.text[self.pos].isspace() and self.text[self.pos] != "#":
            self.pos += 1
        return self.text[start:self.pos] or None

    def ident(self, what: str) -> str:
        self.skip_ws()
        m = _ID_RE.match(self.text, self.pos)
        if not m:
            raise _Fail(self.error(f"expected {what}"))
        end = m.end()
        if end < len(self.text) and not self.text[end].isspace() and self.text[end] != "#":
            self.pos = end
            raise _Fail(self.error(f"unexpected character {self.text[end]!r} in {what}"))
        self.pos = end
        return m.group(0)

    def quoted(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != '"':
            raise _Fail(self.error('expected quoted name "..."'))
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\" and self.pos + 1 < len(self.text) and self.text[self.pos + 1] in '"\\':
                out.append(self.text[self.pos + 1])
                self.pos += 2
                continue
            if ch == '"':
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1
        raise _Fail(self.error("unterminated quoted name"))

    def prior(self) -> tuple[float, int]:
        self.skip_ws()
        if not self.text.startswith("p=", self.pos):
            raise _Fail(self.error("expected p=<probability>"))
        self.pos += 2
        col = self.col
        m = _FLOAT_RE.match(self.text, self.pos)
        end = m.end() if m else self.pos
        if not m or (end < len(self.text) and not self.text[end].isspace() and self.text[end] != "#"):
            raise _Fail(self.error("expected decimal probability after p="))
        self.pos = end
        return float(m.group(0)), col


class _Fail(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


def _parse_raw(text: str | bytes) -> tuple[FaultTree | None, list[Diagnostic], dict[str, tuple[int, int]]]:
    """Parse without semantic validation. Never raises.

    Also returns the (line, column) of every definition.
    """
    diags: list[Diagnostic] = []
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            return None, [Diagnostic("error", None, f"input is not valid UTF-8 (byte offset {exc.start})")], {}
    if text.startswith("\ufeff"):
        text = text[1:]

    events: dict[str, BasicEvent] = {}
    gates: dict[str, Gate] = {}
    seen: dict[str, int] = {}
    positions: dict[str, tuple[int, int]] = {}
    tops: list[tuple[str, int, int]] = []
    refs: list[tuple[str, str, int, int]] = []  # (gate, ref, line, col)

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = _Line(raw, lineno)
        if line.at_end():
            continue
        kw_col = line.col
        keyword = line.word()
        try:
            if keyword == "event":
                id_col = (line.skip_ws(), line.col)[1]
                eid = line.ident("event id")
                name = line.quoted()
                p, p_col = line.prior()
                if not line.at_end():
                    raise _Fail(line.error("unexpected trailing input", eid))
                if eid in seen:
                    diags.append(Diagnostic("error", eid, f"duplicate id (first defined on line {seen[eid]})", lineno, id_col))
                    continue
                if not 0.0 <= p <= 1.0:
                    diags.append(Diagnostic("error", eid, f"prior {p!r} outside [0, 1]", lineno, p_col))
                seen[eid] = lineno
                positions[eid] = (lineno, id_col)
                events[eid] = BasicEvent(eid, name, p)
            elif keyword == "gate":
                id_col = (line.skip_ws(), line.col)[1]
                gid = line.ident("gate id")
                line.skip_ws()
                kind_col = line.col
                kind = line.word()
                if kind not in GATE_KINDS:
                    raise _Fail(Diagnostic("error", gid, "expected gate kind AND or OR", lineno, kind_col))
                inputs = []
                while not line.at_end():
                    col = line.col
                    ref = line.ident("input id")
                    inputs.append(ref)
                    refs.append((gid, ref, lineno, col))
                if gid in seen:
                    diags.append(Diagnostic("error", gid, f"duplicate id (first defined on line {seen[gid]})", lineno, id_col))
                    continue
                seen[gid] = lineno
                positions[gid] = (lineno, id_col)
                gates[gid] = Gate(gid, kind, tuple(inputs))
            elif keyword == "top":
                col = (line.skip_ws(), line.col)[1]
                tid = line.ident("top id")
                if not line.at_end():
                    raise _Fail(line.error("unexpected trailing input"))
                tops.append((tid, lineno, col))
            else:
                diags.append(Diagnostic("error", None, "expected 'event', 'gate' or 'top'", lineno, kw_col))
        except _Fail as f:
            diags.append(f.diag)

    for gid, ref, lineno, col in refs:
        if ref not in seen and gid in gates:
            diags.append(Diagnostic("error", gid, f"unresolved reference {ref!r}", lineno, col))

    if not tops:
        diags.append(Diagnostic("error", None, "missing top declaration"))
        top = ""
    else:
        for tid, lineno, col in tops[1:]:
            diags.append(Diagnostic("error", tid, "more than one 'top' declaration", lineno, col))
        top, lineno, col = tops[0]
        if top not in seen:
            diags.append(Diagnostic("error", top, "top reference does not resolve", lineno, col))

    return FaultTree(events, gates, top), diags, positions


def parse_model(text: str | bytes) -> FaultTree:
    """Parse DSL source into a validated :class:`FaultTree`.

    Raises :class:`ModelError` carrying line/column diagnostics on any
    syntax or semantic error. Warnings (such as unreachable definitions)
    do not prevent parsing.
    """
    ft, diags = check_source(text)
    if ft is None:
        raise ModelError(diags)
    return ft


def check_source(text: str | bytes) -> tuple[FaultTree | None, list[Diagnostic]]:
    """Parse and validate, returning all diagnostics instead of raising."""
    ft, diags, positions = _parse_raw(text)
    if ft is not None:
        known = {(d.id, d.message) for d in diags}
        for d in validate(ft):
            if (d.id, d.message) in known:
                continue
            if d.line is None and d.id in positions:
                d = replace(d, line=positions[d.id][0], column=positions[d.id][1])
            diags.append(d)
    if ft is None or any(d.severity == "error" for d in diags):
        return None, diags
    return ft, diags


# --------------------------------------------------------------------------
# validation


def _find_cycles(ft: FaultTree) -> list[str]:
    """Ids of gates that lie on a cycle of the gate graph."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {gid: WHITE for gid in ft.gates}
    cyclic: set[str] = set()

    for root in sorted(ft.gates, key=natural_key):
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        path: list[str] = [root]
        color[root] = GREY
        while stack:
            gid, i = stack[-1]
            inputs = [r for r in ft.gates[gid].inputs if r in ft.gates]
            if i < len(inputs):
                stack[-1] = (gid, i + 1)
                nxt = inputs[i]
                if color[nxt] == GREY:
                    cyclic.update(path[path.index(nxt):])
                elif color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, 0))
                    path.append(nxt)
            else:
                color[gid] = BLACK
                stack.pop()
                path.pop()
    return sorted(cyclic, key=natural_key)


def validate(ft: FaultTree) -> list[Diagnostic]:
    """Check every fault tree invariant; an empty list means the tree is valid."""
    diags: list[Diagnostic] = []
    for eid in sorted(ft.events, key=natural_key):
        ev = ft.events[eid]
        if not eid or any(ch.isspace() for ch in eid) or ev.id != eid:
            diags.append(Diagnostic("error", eid, "event id must be nonempty and contain no whitespace"))
        if not (0.0 <= ev.prior <= 1.0):
            diags.append(Diagnostic("error", eid, f"prior {ev.prior!r} outside [0, 1]"))
    for gid in sorted(ft.gates, key=natural_key):
        g = ft.gates[gid]
        if not gid or any(ch.isspace() for ch in gid) or g.id != gid:
            diags.append(Diagnostic("error", gid, "gate id must be nonempty and contain no whitespace"))
        if gid in ft.events:
            diags.append(Diagnostic("error", gid, "id used by both an event and a gate"))
        if g.kind not in GATE_KINDS:
            diags.append(Diagnostic("error", gid, f"unknown gate kind {g.kind!r}"))
        if len(g.inputs) < 2:
            diags.append(Diagnostic("error", gid, f"gate needs at least 2 inputs, has {len(g.inputs)}"))
        for ref in g.inputs:
            if ref not in ft.events and ref not in ft.gates:
                diags.append(Diagnostic("error", gid, f"unresolved reference {ref!r}"))
    for gid in _find_cycles(ft):
        diags.append(Diagnostic("error", gid, "gate is its own ancestor (cycle)"))

    if not ft.top:
        diags.append(Diagnostic("error", None, "missing top declaration"))
    elif ft.top not in ft.events and ft.top not in ft.gates:
        diags.append(Diagnostic("error", ft.top, "top reference does not resolve"))
    elif not any(d.severity == "error" for d in diags):
        reached = reachable(ft)
        for nid in sorted(set(ft.events) | set(ft.gates), key=natural_key):
            if nid not in reached:
                diags.append(Diagnostic("warning", nid, "defined but unreachable from top"))
    return diags


def reachable(ft: FaultTree) -> set[str]:
    """Ids reachable from the top reference."""
    seen = {ft.top}
    stack = [ft.top]
    while stack:
        nid = stack.pop()
        gate = ft.gates.get(nid)
        if gate is None:
            continue
        for ref in gate.inputs:
            if ref not in seen:
                seen.add(ref)
                stack.append(ref)
    return seen


def is_valid(ft: FaultTree) -> bool:
    return not any(d.severity == "error" for d in validate(ft))


def require_valid(ft: FaultTree) -> None:
    diags = validate(ft)
    if any(d.severity == "error" for d in diags):
        raise ModelError(diags)


# --------------------------------------------------------------------------
# canonical form


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ") + '"'


def canonicalize(ft: FaultTree) -> str:
    """Deterministic DSL text for a valid tree.

    Events come first in natural id order, then gates in topological order,
    then the top declaration. Priors use the shortest repr that round-trips.
    """
    require_valid(ft)
    lines = []
    for eid in sorted(ft.events, key=natural_key):
        ev = ft.events[eid]
        lines.append(f"event {eid} {_quote(ev.name)} p={float(ev.prior)!r}")
    for g in ft.topological_gates():
        lines.append(f"gate {g.id} {g.kind} {' '.join(g.inputs)}")
    lines.append(f"top {ft.top}")
    return "\n".join(lines) + "\n"


def fingerprint(ft: FaultTree) -> str:
    """Lowercase hex SHA-256 of the canonical text."""
    return hashlib.sha256(canonicalize(ft).encode("utf-8")).hexdigest()
