"""Online reliability evaluation under hard and soft monitoring evidence.

Hard observations condition the network on a basic event's state. Soft
observations replace the event's prior, either by scaling the original
model prior by a percentage or by giving an absolute probability. Scaling
always starts from the model file's prior, never from an earlier update.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .bn import ContradictoryEvidence, InferenceError, compile_to_bn, eliminate_probability
from .ftree import FaultTree, fingerprint, natural_key, require_valid
from .report import format_bsfp, format_pct

__all__ = [
    "Observation",
    "EvidenceCase",
    "ReliabilityReport",
    "CaseFailure",
    "EvidenceError",
    "ContradictoryEvidence",
    "Session",
    "open_session",
    "apply_case",
    "run_case_suite",
    "sweep",
    "verify_against_paper",
    "mixture_audit",
    "load_cases",
    "load_reference_cases",
    "DEFAULT_OBSERVABLE",
]

HARD, SCALED, ABSOLUTE = "hard", "scaled", "absolute"
SOURCES = ("manual", "drone", "simulated")
DEFAULT_OBSERVABLE = ("BE1", "BE2", "BE14")


class EvidenceError(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    """A statement about one basic event.

    ``value`` is a bool for hard observations, the percentage increase j
    for scaled ones and the new probability for absolute ones.
    """

    target: str
    kind: str
    value: float | bool
    source: str = "manual"
    timestamp: datetime | None = None

    def __post_init__(self):
        if self.kind not in (HARD, SCALED, ABSOLUTE):
            raise EvidenceError(f"unknown observation kind {self.kind!r}")
        if self.source not in SOURCES:
            raise EvidenceError(f"unknown observation source {self.source!r}")
        if self.kind == HARD:
            if not isinstance(self.value, bool):
                raise EvidenceError("hard observation value must be true or false")
        else:
            if isinstance(self.value, bool) or not isinstance(self.value, (int, float)) or not math.isfinite(self.value):
                raise EvidenceError(f"{self.kind} observation needs a finite number")
            if self.kind == SCALED and self.value < -100:
                raise EvidenceError(f"percentage change {self.value} below -100")
            if self.kind == ABSOLUTE and not 0.0 <= self.value <= 1.0:
                raise EvidenceError(f"absolute prior {self.value} outside [0, 1]")

    @classmethod
    def hard(cls, target: str, value: bool, **kw) -> "Observation":
        return cls(target, HARD, bool(value), **kw)

    @classmethod
    def scaled(cls, target: str, pct: float, **kw) -> "Observation":
        return cls(target, SCALED, float(pct), **kw)

    @classmethod
    def absolute(cls, target: str, p: float, **kw) -> "Observation":
        return cls(target, ABSOLUTE, float(p), **kw)

    def resolve(self, original_prior: float) -> tuple[float | None, str | None]:
        """Prior to use for a soft observation (None for hard) and any clamp warning."""
        if self.kind == HARD:
            return None, None
        if self.kind == ABSOLUTE:
            return float(self.value), None
        p = original_prior * (1.0 + self.value / 100.0)
        if p > 1.0:
            return 1.0, f"{self.target}: scaled prior {p:.6g} clamped to 1.0"
        return max(p, 0.0), None

    def to_dict(self) -> dict:
        d: dict = {"event": self.target, "kind": self.kind}
        d[{HARD: "value", SCALED: "pct", ABSOLUTE: "p"}[self.kind]] = self.value
        d["source"] = self.source
        if self.timestamp is not None:
            d["timestamp"] = self.timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Observation":
        if not isinstance(d, Mapping):
            raise EvidenceError("observation must be a JSON object")
        try:
            target = d["event"]
            kind = d["kind"]
        except KeyError as exc:
            raise EvidenceError(f"observation missing field {exc.args[0]!r}") from None
        if not isinstance(target, str) or not target:
            raise EvidenceError("observation 'event' must be a nonempty string")
        key = {HARD: "value", SCALED: "pct", ABSOLUTE: "p"}.get(kind)
        if key is None:
            raise EvidenceError(f"unknown observation kind {kind!r}")
        if key not in d:
            raise EvidenceError(f"{kind} observation on {target} missing {key!r}")
        ts = d.get("timestamp")
        if ts is not None:
            try:
                ts = datetime.fromisoformat(str(ts).replace("Z", "+00:00"))
            except ValueError:
                raise EvidenceError(f"bad timestamp {d['timestamp']!r}") from None
            if ts.tzinfo is None:
                ts = ts.replace(tzinfo=timezone.utc)
        return cls(target, kind, d[key], source=d.get("source", "manual"), timestamp=ts)


@dataclass(frozen=True)
class EvidenceCase:
    label: str
    observations: tuple[Observation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))

    def to_dict(self) -> dict:
        return {"label": self.label, "observations": [o.to_dict() for o in self.observations]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvidenceCase":
        if not isinstance(d, Mapping) or "observations" not in d:
            raise EvidenceError("case must be an object with 'label' and 'observations'")
        obs = d["observations"]
        if not isinstance(obs, list):
            raise EvidenceError("'observations' must be a list")
        return cls(str(d.get("label", "")), tuple(Observation.from_dict(o) for o in obs))


@dataclass(frozen=True)
class ReliabilityReport:
    fingerprint: str
    label: str
    baseline: float
    posterior: float
    pct_change: float
    direction: str  # "up" | "down" | "flat"
    echo: tuple[dict, ...] = ()

    @property
    def warnings(self) -> list[str]:
        return [e["warning"] for e in self.echo if e.get("warning")]

    def to_dict(self) -> dict:
        return {
            "case": self.label,
            "baseline": format_bsfp(self.baseline),
            "bsfp": format_bsfp(self.posterior),
            "pct_change": format_pct(self.pct_change),
            "direction": self.direction,
            "fingerprint": self.fingerprint,
            "observations": [dict(e) for e in self.echo],
        }


@dataclass(frozen=True)
class CaseFailure:
    label: str
    error: str

    def to_dict(self) -> dict:
        return {"case": self.label, "error": self.error}


def pct_change(baseline: float, posterior: float) -> float:
    if posterior == baseline:
        return 0.0
    if baseline == 0.0:
        return math.inf
    return (posterior - baseline) / baseline * 100.0


def _direction(baseline: float, posterior: float) -> str:
    if posterior > baseline:
        return "up"
    if posterior < baseline:
        return "down"
    return "flat"


def _posterior(ft: FaultTree, observations: Iterable[Observation]) -> tuple[float, tuple[dict, ...]]:
    priors: dict[str, float] = {}
    hard: dict[str, bool] = {}
    echo = []
    for obs in observations:
        if obs.target not in ft.events:
            raise EvidenceError(f"unknown target {obs.target!r}")
        original = ft.events[obs.target].prior
        resolved, warning = obs.resolve(original)
        entry = {"target": obs.target, "kind": obs.kind, "value": obs.value, "original_prior": original}
        if obs.kind == HARD:
            hard[obs.target] = bool(obs.value)
        else:
            priors[obs.target] = resolved
            entry["resolved_prior"] = resolved
        if warning:
            entry["warning"] = warning
        echo.append(entry)
    model = ft.with_priors(priors) if priors else ft
    p = eliminate_probability(compile_to_bn(model), hard).probability
    return p, tuple(echo)


def baseline_probability(ft: FaultTree) -> float:
    return eliminate_probability(compile_to_bn(ft)).probability


def _report(ft: FaultTree, label: str, baseline: float, observations, digest: str) -> ReliabilityReport:
    posterior, echo = _posterior(ft, observations)
    return ReliabilityReport(
        digest, label, baseline, posterior,
        pct_change(baseline, posterior), _direction(baseline, posterior), echo,
    )


def apply_case(ft: FaultTree, case: EvidenceCase) -> ReliabilityReport:
    """Baseline versus posterior under one independent evidence case."""
    require_valid(ft)
    seen = set()
    for obs in case.observations:
        if obs.target not in ft.events:
            raise EvidenceError(f"case {case.label}: unknown target {obs.target!r}")
        if obs.target in seen:
            raise EvidenceError(f"case {case.label}: duplicate target {obs.target!r}")
        seen.add(obs.target)
    return _report(ft, case.label, baseline_probability(ft), case.observations, fingerprint(ft))


def run_case_suite(ft: FaultTree, cases: Sequence[EvidenceCase]) -> list[ReliabilityReport | CaseFailure]:
    """Apply each case independently; failing cases become :class:`CaseFailure` entries."""
    out: list[ReliabilityReport | CaseFailure] = []
    for case in cases:
        try:
            out.append(apply_case(ft, case))
        except (EvidenceError, InferenceError) as exc:
            out.append(CaseFailure(case.label, str(exc)))
    return out


class Session:
    """Append-only evidence stream against one model.

    The state keeps the latest observation per target. Every append returns
    a fresh report and adds one line to :attr:`log`; when ``log_sink`` is
    given the line is also written there as JSON.
    """

    def __init__(self, ft: FaultTree, observability: Iterable[str] = DEFAULT_OBSERVABLE,
                 log_sink: IO[str] | None = None):
        require_valid(ft)
        self.ft = ft
        self.observability = frozenset(observability)
        unknown = sorted(self.observability - set(ft.events), key=natural_key)
        if unknown:
            raise EvidenceError(f"observability set names unknown events: {', '.join(unknown)}")
        self.state: dict[str, Observation] = {}
        self.reports: list[ReliabilityReport] = []
        self.log: list[dict] = []
        self._sink = log_sink
        self._digest = fingerprint(ft)
        self._baseline = baseline_probability(ft)

    @property
    def baseline(self) -> float:
        digest = fingerprint(self.ft)
        if digest != self._digest:
            self._digest, self._baseline = digest, baseline_probability(self.ft)
        return self._baseline

    def append(self, obs: Observation) -> ReliabilityReport:
        if not isinstance(obs, Observation):
            raise EvidenceError("malformed observation")
        if obs.target not in self.observability:
            raise EvidenceError(f"target {obs.target!r} is not observable in this session")
        state = dict(self.state)
        state.pop(obs.target, None)
        state[obs.target] = obs
        step = len(self.reports) + 1
        report = _report(self.ft, f"step{step}", self.baseline, state.values(), self._digest)
        self.state = state
        self.reports.append(report)
        line = {
            "step": step,
            "observation": obs.to_dict(),
            "posterior": report.posterior,
            "bsfp": format_bsfp(report.posterior),
            "pct_change": format_pct(report.pct_change),
        }
        self.log.append(line)
        if self._sink is not None:
            self._sink.write(json.dumps(line) + "\n")
            self._sink.flush()
        return report


def open_session(ft: FaultTree, observability: Iterable[str] = DEFAULT_OBSERVABLE,
                 log_sink: IO[str] | None = None) -> Session:
    return Session(ft, observability, log_sink)


def sweep(ft: FaultTree, target: str, grid: Iterable[float]) -> list[tuple[float, float]]:
    """P(top) as the target's prior runs over ``grid``; other priors unchanged.

    P(top) is affine in one root's prior, so two conditioned queries give the
    whole curve. Interpolating with a non-negative slope keeps the output
    monotone in floating point too.
    """
    require_valid(ft)
    if target not in ft.events:
        raise EvidenceError(f"unknown target {target!r}")
    grid = [float(p) for p in grid]
    for p in grid:
        if not 0.0 <= p <= 1.0:
            raise EvidenceError(f"grid value {p} outside [0, 1]")
    bn = compile_to_bn(ft.with_priors({target: 0.5}))
    lo = eliminate_probability(bn, {target: False}).probability
    hi = eliminate_probability(bn, {target: True}).probability
    slope = max(hi - lo, 0.0)
    return [(p, lo + p * slope) for p in grid]


# --------------------------------------------------------------------------
# published reference cases


@dataclass(frozen=True)
class ReferenceCase:
    table: str  # "binary" | "soft" | "mixed"
    case: EvidenceCase
    bsfp: float
    pct_change: float


@dataclass
class CaseResidual:
    table: str
    label: str
    published_bsfp: float
    computed_bsfp: float
    abs_residual: float
    rel_residual: float
    published_pct: float
    computed_pct: float
    pct_residual: float  # percentage points

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "case": self.label,
            "published_bsfp": format_bsfp(self.published_bsfp),
            "computed_bsfp": format_bsfp(self.computed_bsfp),
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "published_pct": format_pct(self.published_pct),
            "computed_pct": format_pct(self.computed_pct),
            "pct_residual": self.pct_residual,
        }


@dataclass
class VerificationReport:
    fingerprint: str
    baseline: float
    residuals: list[CaseResidual] = field(default_factory=list)
    structural: list[dict] = field(default_factory=list)
    mixture: float | None = None

    def max_rel_residual(self, table: str) -> float:
        return max(r.rel_residual for r in self.residuals if r.table == table)

    def max_pct_residual(self, table: str) -> float:
        return max(abs(r.pct_residual) for r in self.residuals if r.table == table)

    def to_dict(self) -> dict:
        tables = sorted({r.table for r in self.residuals})
        return {
            "fingerprint": self.fingerprint,
            "baseline": format_bsfp(self.baseline),
            "cases": [r.to_dict() for r in self.residuals],
            "summary": {
                t: {
                    "max_rel_residual": self.max_rel_residual(t),
                    "max_pct_residual": self.max_pct_residual(t),
                }
                for t in tables
            },
            "structural_equalities": self.structural,
            "mixture_audit": None if self.mixture is None else format_bsfp(self.mixture),
        }


def _parse_cell(target: str, cell: str) -> Observation | None:
    cell = cell.strip()
    if not cell:
        return None
    if cell in ("T", "F"):
        return Observation.hard(target, cell == "T")
    if cell.startswith("+") and cell.endswith("%"):
        return Observation.scaled(target, float(cell[1:-1]))
    raise EvidenceError(f"bad reference cell {cell!r}")


def load_reference_cases(path: str | Path | None = None) -> list[ReferenceCase]:
    """Published case tables; the bundled fixture when ``path`` is None."""
    if path is None:
        text = resources.files("onlinerel").joinpath("data/reference_cases.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    doc = json.loads(text)
    columns = doc["columns"]
    out = []
    for table, rows in doc["tables"].items():
        for row in rows:
            obs = [o for o in (_parse_cell(t, c) for t, c in zip(columns, row["cells"])) if o]
            out.append(ReferenceCase(table, EvidenceCase(row["label"], tuple(obs)), row["bsfp"], row["pct"]))
    return out


def mixture_audit(priors: Mapping[str, float], conditionals: Mapping[tuple[bool, ...], float]) -> float:
    """Sum over joint states s of P(s) * P(top | s) for independent events.

    ``conditionals`` is keyed by state tuples in the order of ``priors``.
    """
    ids = list(priors)
    total = 0.0
    for states, value in conditionals.items():
        weight = 1.0
        for eid, s in zip(ids, states):
            weight *= priors[eid] if s else 1.0 - priors[eid]
        total += weight * value
    return total


def verify_against_paper(
    ft: FaultTree,
    fixtures: Sequence[ReferenceCase] | None = None,
    pair: tuple[str, str] = ("BE1", "BE2"),
    pivot: str = "BE14",
) -> VerificationReport:
    """Residuals of the model against published case tables.

    Also checks that the posterior is bitwise identical across the
    (T,F), (F,T), (T,T) states of ``pair`` for each state of ``pivot``, and
    recomputes the baseline as a mixture over the published binary table.
    """
    fixtures = load_reference_cases() if fixtures is None else list(fixtures)
    baseline = baseline_probability(ft)
    report = VerificationReport(fingerprint(ft), baseline)
    for ref in fixtures:
        posterior, _ = _posterior(ft, ref.case.observations)
        pct = pct_change(baseline, posterior)
        report.residuals.append(CaseResidual(
            ref.table, ref.case.label, ref.bsfp, posterior,
            abs(posterior - ref.bsfp), abs(posterior - ref.bsfp) / ref.bsfp,
            ref.pct_change, pct, pct - ref.pct_change,
        ))

    names = [*pair, pivot]
    if all(n in ft.events for n in names):
        bn = compile_to_bn(ft)
        for pivot_state in (False, True):
            values = []
            for a, b in ((True, False), (False, True), (True, True)):
                ev = {pair[0]: a, pair[1]: b, pivot: pivot_state}
                try:
                    values.append(eliminate_probability(bn, ev).probability)
                except InferenceError:
                    values.append(math.nan)
            report.structural.append({
                pivot: pivot_state,
                "posteriors": values,
                "equal": values[0] == values[1] == values[2],
            })

        binary = [r for r in fixtures if r.table == "binary"]
        conditionals = {}
        for ref in binary:
            obs = {o.target: o for o in ref.case.observations}
            if all(n in obs and obs[n].kind == HARD for n in names):
                conditionals[tuple(obs[n].value for n in names)] = ref.bsfp
        if len(conditionals) == 2 ** len(names):
            report.mixture = mixture_audit({n: ft.events[n].prior for n in names}, conditionals)
    return report


# --------------------------------------------------------------------------
# file formats


def load_cases(path: str | Path) -> list[EvidenceCase]:
    """Read a case file: one case object, a list of them, or ``{"cases": [...]}``."""
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise EvidenceError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if isinstance(doc, Mapping) and "cases" in doc:
        doc = doc["cases"]
    if isinstance(doc, Mapping):
        doc = [doc]
    if not isinstance(doc, list):
        raise EvidenceError(f"{path}: expected a case object or a list of cases")
    return [EvidenceCase.from_dict(d) for d in doc]


def read_observations(lines: Iterable[str]) -> list[Observation]:
    """Parse a JSON Lines observation stream, skipping blank lines."""
    out = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvidenceError(f"line {n}: invalid JSON ({exc.msg})") from None
        if isinstance(d, Mapping) and "observation" in d:
            d = d["observation"]
        out.append(Observation.from_dict(d))
    return out
