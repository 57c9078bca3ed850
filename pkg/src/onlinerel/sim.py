"""Seeded drone-inspection missions that feed the evidence stream.

Each blade surface yields one feature sample per capture. The sample is
drawn from the trusted base distribution, shifted and widened in proportion
to the degradation level of the events visible on that surface, and gated
against the trusted sample. Proceed captures report the degraded events as
observations; recaptures draw a fresh sample up to a bound, after which the
surface escalates to manual inspection and reports nothing.

Randomness comes from a SplitMix64 generator so a seed reproduces the same
mission on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Mapping, NamedTuple, Sequence

from .evidence import DEFAULT_OBSERVABLE, Observation, ReliabilityReport, open_session
from .ftree import FaultTree, natural_key
from .gate import MANUAL, MIN_SAMPLE_SIZE, PROCEED, RECAPTURE, FeatureSample, GateDecision, GateThresholds, gate

__all__ = [
    "SURFACES",
    "SplitMix64",
    "MissionPlan",
    "EventDegradation",
    "AnomalyScenario",
    "CaptureRecord",
    "MissionResult",
    "SimulationError",
    "trusted_sample",
    "run_mission",
    "mission_to_session",
]

SURFACES = ("LeadingEdge", "SuctionSide", "PressureSide", "TrailingEdge")
DEFAULT_START = datetime(2021, 1, 1, tzinfo=timezone.utc)

_MASK64 = (1 << 64) - 1


class SimulationError(ValueError):
    pass


class SplitMix64:
    """64-bit SplitMix generator (Steele, Lea, Flood)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform on [0, 1) with 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        # Box-Muller, cosine branch only; 1 - u keeps the log argument in (0, 1].
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def base(self, kind: str) -> float:
        """One unit-variance draw from the named base distribution."""
        if kind == "normal":
            return self.normal()
        if kind == "uniform":
            return math.sqrt(3.0) * (2.0 * self.random() - 1.0)
        raise SimulationError(f"unknown base distribution {kind!r}")


@dataclass(frozen=True)
class MissionPlan:
    turbine_id: str = "WT-01"
    blades: int = 3
    images_per_surface: int = 12
    features_per_image: int = 32
    duration_minutes: float = 75.0
    duration_window: tuple[float, float] = (60.0, 90.0)
    drones: int = 1
    start: datetime = DEFAULT_START

    surfaces = SURFACES

    def __post_init__(self):
        if self.blades < 1:
            raise SimulationError("a mission needs at least one blade")
        if self.images_per_surface < 1 or self.features_per_image < 1:
            raise SimulationError("images and features per image must be positive")
        if self.sample_size < MIN_SAMPLE_SIZE:
            raise SimulationError(f"captures need at least {MIN_SAMPLE_SIZE} feature values per surface")
        if self.drones < 1:
            raise SimulationError("a mission needs at least one drone")
        lo, hi = self.duration_window
        if not lo <= self.duration_minutes <= hi:
            raise SimulationError(f"duration {self.duration_minutes} min outside window [{lo}, {hi}]")

    @property
    def sample_size(self) -> int:
        return self.images_per_surface * self.features_per_image

    def sites(self) -> list[tuple[int, str]]:
        return [(b, s) for b in range(1, self.blades + 1) for s in SURFACES]

    @classmethod
    def from_dict(cls, d: Mapping) -> "MissionPlan":
        d = dict(d)
        if "duration_window" in d:
            d["duration_window"] = tuple(d["duration_window"])
        if "start" in d:
            d["start"] = datetime.fromisoformat(str(d["start"]).replace("Z", "+00:00"))
        try:
            return cls(**d)
        except TypeError as exc:
            raise SimulationError(f"bad mission plan: {exc}") from None


@dataclass(frozen=True)
class EventDegradation:
    level: float
    blades: tuple[int, ...] | None = None  # None: every blade
    surfaces: tuple[str, ...] | None = None  # None: every surface

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise SimulationError(f"degradation level {self.level} outside [0, 1]")
        if self.surfaces is not None:
            bad = [s for s in self.surfaces if s not in SURFACES]
            if bad:
                raise SimulationError(f"unknown surfaces {bad}")

    def visible_at(self, blade: int, surface: str) -> bool:
        return (self.blades is None or blade in self.blades) and (
            self.surfaces is None or surface in self.surfaces
        )


@dataclass(frozen=True)
class AnomalyScenario:
    """Degradation per observable event plus the feature-shift knobs.

    A surface whose worst visible degradation level is ``s`` produces
    features ``shift * s + sqrt(1 + noise * s) * base``.
    """

    degradation: Mapping[str, EventDegradation] = field(default_factory=dict)
    shift: float = 0.2
    noise: float = 0.0
    max_pct: float = 75.0
    observable: tuple[str, ...] = DEFAULT_OBSERVABLE
    base: str = "normal"

    def __post_init__(self):
        if self.noise < 0:
            raise SimulationError("noise inflation must be non-negative")
        if self.base not in ("normal", "uniform"):
            raise SimulationError(f"unknown base distribution {self.base!r}")

    def severity(self, blade: int, surface: str) -> float:
        return max((d.level for d in self.degradation.values() if d.visible_at(blade, surface)), default=0.0)

    def observation_for(self, event: str, **kw) -> Observation | None:
        level = self.degradation[event].level
        if level == 0.0:
            return None
        if level == 1.0:
            return Observation.hard(event, True, **kw)
        return Observation.scaled(event, level * self.max_pct, **kw)

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnomalyScenario":
        if not isinstance(d, Mapping):
            raise SimulationError("scenario must be a JSON object")
        events = {}
        for eid, spec in dict(d.get("events", {})).items():
            if isinstance(spec, (int, float)):
                spec = {"level": spec}
            if not isinstance(spec, Mapping) or "level" not in spec:
                raise SimulationError(f"scenario event {eid!r} needs a level")
            events[eid] = EventDegradation(
                float(spec["level"]),
                tuple(spec["blades"]) if spec.get("blades") is not None else None,
                tuple(spec["surfaces"]) if spec.get("surfaces") is not None else None,
            )
        return cls(
            events,
            shift=float(d.get("shift", 0.2)),
            noise=float(d.get("noise", 0.0)),
            max_pct=float(d.get("max_pct", 75.0)),
            observable=tuple(d.get("observable", DEFAULT_OBSERVABLE)),
            base=d.get("base", "normal"),
        )


@dataclass(frozen=True)
class CaptureRecord:
    blade: int
    surface: str
    drone: int
    minute: float
    sample: FeatureSample
    decision: GateDecision
    recaptures: int
    attempts: tuple[float, ...]
    escalated: bool = False

    def to_dict(self) -> dict:
        n = len(self.sample)
        mean = math.fsum(self.sample.values) / n
        var = math.fsum((v - mean) ** 2 for v in self.sample.values) / n
        return {
            "blade": self.blade,
            "surface": self.surface,
            "drone": self.drone,
            "minute": self.minute,
            "n": n,
            "mean": mean,
            "std": math.sqrt(var),
            "measure": self.decision.measure,
            "confidence": self.decision.confidence,
            "action": self.decision.action,
            "recaptures": self.recaptures,
            "attempts": list(self.attempts),
            "escalated": self.escalated,
        }


class MissionResult(NamedTuple):
    records: list[CaptureRecord]
    observations: list[Observation]


def trusted_sample(seed: int, size: int = 1000, base: str = "normal") -> FeatureSample:
    """Reference sample from a stream independent of the mission stream for ``seed``."""
    rng = SplitMix64(seed ^ 0x5DEECE66D2B5A3C1)
    return FeatureSample(tuple(rng.base(base) for _ in range(size)), "trusted")


def run_mission(
    plan: MissionPlan,
    scenario: AnomalyScenario,
    trusted: FeatureSample,
    thresholds: GateThresholds = GateThresholds(),
    seed: int = 0,
    measure: str = "ks",
    max_recaptures: int = 3,
) -> MissionResult:
    """Fly every blade surface once, gating each capture and emitting observations."""
    if max_recaptures < 0:
        raise SimulationError("max_recaptures must be non-negative")
    unobservable = sorted(set(scenario.degradation) - set(scenario.observable), key=natural_key)
    if unobservable:
        raise SimulationError(f"scenario targets unobservable events: {', '.join(unobservable)}")

    rng = SplitMix64(seed)
    sites = plan.sites()
    per_drone = math.ceil(len(sites) / plan.drones)
    slot = plan.duration_minutes / per_drone
    emitted: set[str] = set()
    records: list[CaptureRecord] = []
    observations: list[Observation] = []

    for k, (blade, surface) in enumerate(sites):
        drone = k % plan.drones + 1
        minute = (k // plan.drones + 1) * slot
        s = scenario.severity(blade, surface)
        loc, width = scenario.shift * s, math.sqrt(1.0 + scenario.noise * s)

        attempts: list[float] = []
        recaptures = 0
        escalated = False
        while True:
            sample = FeatureSample(
                tuple(loc + width * rng.base(scenario.base) for _ in range(plan.sample_size)),
                f"{plan.turbine_id}/B{blade}/{surface}",
            )
            _, decision = gate(trusted, sample, measure, thresholds)
            attempts.append(decision.confidence)
            if decision.action == RECAPTURE:
                if recaptures < max_recaptures:
                    recaptures += 1
                    continue
                decision = GateDecision(MANUAL, decision.confidence, decision.measure)
                escalated = True
            break
        records.append(CaptureRecord(blade, surface, drone, minute, sample, decision,
                                     recaptures, tuple(attempts), escalated))

        if decision.action != PROCEED:
            continue
        stamp = plan.start + timedelta(minutes=minute)
        for event in sorted(scenario.degradation, key=natural_key):
            if event in emitted or not scenario.degradation[event].visible_at(blade, surface):
                continue
            obs = scenario.observation_for(event, source="drone", timestamp=stamp)
            if obs is not None:
                emitted.add(event)
                observations.append(obs)
    return MissionResult(records, observations)


def mission_to_session(
    ft: FaultTree,
    mission: MissionResult | Sequence[Observation],
    observability: Iterable[str] = DEFAULT_OBSERVABLE,
) -> list[ReliabilityReport]:
    """Append mission observations in order to a fresh session; one report per step."""
    observations = mission.observations if isinstance(mission, MissionResult) else list(mission)
    session = open_session(ft, observability)
    return [session.append(obs) for obs in observations]
