"""Confidence gating of observed feature samples against a trusted sample.

Distances are computed from the two empirical CDFs. Confidence maps a
distance into [0, 1], decreasing in the distance:

* KS: ``1 - d``; Kuiper: ``1 - d / 2`` (Kuiper lives in [0, 2]).
* Cramer-von Mises, Anderson-Darling, Wasserstein-1: ``exp(-d / scale)``
  where ``scale`` defaults to the trusted sample's interquartile range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "MEASURES",
    "FeatureSample",
    "DistanceReport",
    "GateThresholds",
    "GateDecision",
    "GateError",
    "ecdf_distance",
    "confidence",
    "decide",
    "gate",
    "gate_channels",
    "MIN_SAMPLE_SIZE",
]

MEASURES = ("ks", "kuiper", "cvm", "ad", "wasserstein")
MIN_SAMPLE_SIZE = 8

MANUAL, RECAPTURE, PROCEED = "ManualInspection", "Recapture", "Proceed"
ACTION_RANK = {MANUAL: 0, RECAPTURE: 1, PROCEED: 2}


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSample:
    values: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise GateError(f"sample {self.label!r} is empty")
        if not all(math.isfinite(v) for v in self.values):
            raise GateError(f"sample {self.label!r} contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def iqr(self) -> float:
        q75, q25 = np.percentile(self.array(), [75, 25])
        return float(q75 - q25)


@dataclass(frozen=True)
class DistanceReport:
    measure: str
    value: float
    confidence: float

    def to_dict(self) -> dict:
        return {"measure": self.measure, "value": self.value, "confidence": self.confidence}


@dataclass(frozen=True)
class GateThresholds:
    tau_low: float = 0.6
    tau_high: float = 0.9

    def __post_init__(self):
        if not (0.0 <= self.tau_low < self.tau_high <= 1.0):
            raise GateError(f"thresholds must satisfy 0 <= tau_low < tau_high <= 1, got {self.tau_low}, {self.tau_high}")


@dataclass(frozen=True)
class GateDecision:
    action: str
    confidence: float
    measure: str | None = None

    def to_dict(self) -> dict:
        return {"action": self.action, "confidence": self.confidence, "measure": self.measure}


def _ecdfs(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both ECDFs evaluated at the sorted distinct pooled values."""
    x = np.sort(x)
    y = np.sort(y)
    z = np.unique(np.concatenate([x, y]))
    fx = np.searchsorted(x, z, side="right") / len(x)
    fy = np.searchsorted(y, z, side="right") / len(y)
    return z, fx, fy


def ks(x, y) -> float:
    _, fx, fy = _ecdfs(np.asarray(x, float), np.asarray(y, float))
    return float(np.max(np.abs(fx - fy)))


def kuiper(x, y) -> float:
    _, fx, fy = _ecdfs(np.asarray(x, float), np.asarray(y, float))
    d = fx - fy
    return float(max(d.max(), 0.0) + max((-d).max(), 0.0))


def cramer_von_mises(x, y) -> float:
    """Two-sample statistic T = nm/(n+m)^2 * sum over pooled points of (F_n - G_m)^2."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, m = len(x), len(y)
    z, fx, fy = _ecdfs(x, y)
    # weight each distinct value by its multiplicity in the pooled sample
    pooled = np.sort(np.concatenate([x, y]))
    counts = np.searchsorted(pooled, z, side="right") - np.searchsorted(pooled, z, side="left")
    return float(n * m / (n + m) ** 2 * np.sum(counts * (fx - fy) ** 2))


def anderson_darling(x, y) -> float:
    """Two-sample statistic (nm/N) * integral (F_n - G_m)^2 / (H (1 - H)) dH_N.

    H_N is the pooled ECDF; the last pooled value (H = 1) carries no mass in
    the integrand.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, m = len(x), len(y)
    N = n + m
    z, fx, fy = _ecdfs(x, y)
    h = (n * fx + m * fy) / N
    pooled = np.sort(np.concatenate([x, y]))
    counts = np.searchsorted(pooled, z, side="right") - np.searchsorted(pooled, z, side="left")
    keep = h < 1.0
    terms = counts[keep] / N * (fx[keep] - fy[keep]) ** 2 / (h[keep] * (1.0 - h[keep]))
    return float(n * m / N * np.sum(terms))


def wasserstein1(x, y) -> float:
    x = np.sort(np.asarray(x, float))
    y = np.sort(np.asarray(y, float))
    if len(x) == len(y):
        return float(np.mean(np.abs(x - y)))
    z, fx, fy = _ecdfs(x, y)
    return float(np.sum(np.abs(fx - fy)[:-1] * np.diff(z)))


_DISTANCES = {
    "ks": ks,
    "kuiper": kuiper,
    "cvm": cramer_von_mises,
    "ad": anderson_darling,
    "wasserstein": wasserstein1,
}


def confidence(measure: str, value: float, scale: float | None = None) -> float:
    if measure == "ks":
        return min(max(1.0 - value, 0.0), 1.0)
    if measure == "kuiper":
        return min(max(1.0 - value / 2.0, 0.0), 1.0)
    if measure in ("cvm", "ad", "wasserstein"):
        if scale is None or not scale > 0:
            raise GateError(f"{measure} confidence needs a positive scale")
        return math.exp(-value / scale)
    raise GateError(f"unknown measure {measure!r}")


def _default_scale(trusted: FeatureSample) -> float:
    scale = trusted.iqr()
    if scale > 0:
        return scale
    std = float(np.std(trusted.array()))
    return std if std > 0 else 1.0


def ecdf_distance(measure: str, trusted: FeatureSample, observed: FeatureSample,
                  scale: float | None = None) -> DistanceReport:
    """Distance between trusted and observed samples, with its confidence."""
    measure = measure.lower()
    if measure not in _DISTANCES:
        raise GateError(f"unknown measure {measure!r}; choose from {', '.join(MEASURES)}")
    for s in (trusted, observed):
        if len(s) < MIN_SAMPLE_SIZE:
            raise GateError(f"sample {s.label!r} has {len(s)} values, need at least {MIN_SAMPLE_SIZE}")
    value = _DISTANCES[measure](trusted.array(), observed.array())
    if scale is None and measure in ("cvm", "ad", "wasserstein"):
        scale = _default_scale(trusted)
    return DistanceReport(measure, value, confidence(measure, value, scale))


def decide(conf: float, thresholds: GateThresholds = GateThresholds()) -> GateDecision:
    """Three-way action; each boundary belongs to the higher-confidence side."""
    if not isinstance(thresholds, GateThresholds):
        raise GateError("invalid thresholds")
    if not (0.0 <= conf <= 1.0):
        raise GateError(f"confidence {conf} outside [0, 1]")
    if conf < thresholds.tau_low:
        action = MANUAL
    elif conf < thresholds.tau_high:
        action = RECAPTURE
    else:
        action = PROCEED
    return GateDecision(action, conf)


def gate(trusted: FeatureSample, observed: FeatureSample, measure: str = "ks",
         thresholds: GateThresholds = GateThresholds(),
         scale: float | None = None) -> tuple[DistanceReport, GateDecision]:
    dist = ecdf_distance(measure, trusted, observed, scale)
    d = decide(dist.confidence, thresholds)
    return dist, GateDecision(d.action, d.confidence, dist.measure)


def gate_channels(trusted: Sequence[FeatureSample], observed: Sequence[FeatureSample],
                  measure: str = "ks", thresholds: GateThresholds = GateThresholds()
                  ) -> tuple[list[DistanceReport], GateDecision]:
    """Gate each channel separately and decide on the minimum confidence."""
    if len(trusted) != len(observed) or not trusted:
        raise GateError("need the same nonzero number of trusted and observed channels")
    reports = [ecdf_distance(measure, t, o) for t, o in zip(trusted, observed)]
    worst = min(r.confidence for r in reports)
    d = decide(worst, thresholds)
    return reports, GateDecision(d.action, worst, measure)
