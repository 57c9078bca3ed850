import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from onlinerel.gate import (
    MANUAL,
    MEASURES,
    PROCEED,
    RECAPTURE,
    FeatureSample,
    GateError,
    GateThresholds,
    anderson_darling,
    confidence,
    cramer_von_mises,
    decide,
    ecdf_distance,
    gate,
    gate_channels,
    ks,
    kuiper,
    wasserstein1,
)

samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=8, max_size=60)


def fs(values, label="s"):
    return FeatureSample(tuple(values), label)


def slow_ad(x, y):
    # direct sum over the sorted pooled sample, one term per point
    n, m = len(x), len(y)
    N = n + m
    pooled = sorted(list(x) + list(y))
    total = 0.0
    for z in pooled:
        f = sum(v <= z for v in x) / n
        g = sum(v <= z for v in y) / m
        h = (n * f + m * g) / N
        if h < 1:
            total += (f - g) ** 2 / (h * (1 - h)) / N
    return n * m / N * total


def test_ks_identical_and_disjoint():
    x = np.linspace(0, 1, 20)
    assert ks(x, x) == 0.0
    assert ks(x, x + 5) == 1.0
    assert kuiper(x, x + 5) == 1.0


def test_ks_uniform_half_overlap():
    rng = np.random.default_rng(7)
    d = ks(rng.uniform(0, 1, 10_000), rng.uniform(0.5, 1.5, 10_000))
    assert abs(d - 0.5) <= 0.03


def test_wasserstein_translation():
    rng = np.random.default_rng(3)
    x = rng.normal(size=500)
    for delta in (0.0, 0.25, -1.5, 3.0):
        assert wasserstein1(x, x + delta) == pytest.approx(abs(delta), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(x=samples, y=samples)
def test_matches_scipy(x, y):
    assert ks(x, y) == pytest.approx(stats.ks_2samp(x, y, method="asymp").statistic, abs=1e-12)
    assert wasserstein1(x, y) == pytest.approx(stats.wasserstein_distance(x, y), rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(x=st.lists(st.integers(-10**6, 10**6), min_size=8, max_size=40, unique=True),
       y=st.lists(st.integers(-10**6, 10**6), min_size=8, max_size=40, unique=True))
def test_cvm_matches_scipy_without_ties(x, y):
    if set(x) & set(y):
        return
    ref = stats.cramervonmises_2samp(x, y).statistic
    assert cramer_von_mises(x, y) == pytest.approx(ref, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(x=samples, y=samples)
def test_ad_matches_direct_sum(x, y):
    assert anderson_darling(x, y) == pytest.approx(slow_ad(x, y), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(x=samples, y=samples)
def test_measure_properties(x, y):
    for f in (ks, kuiper, cramer_von_mises, anderson_darling, wasserstein1):
        d = f(x, y)
        assert d >= 0 and math.isfinite(d)
        assert f(x, y) == pytest.approx(f(y, x), rel=1e-12, abs=1e-15)
        assert f(x, x) == 0.0
    assert kuiper(x, y) >= ks(x, y) - 1e-15
    assert ks(x, y) <= 1 and kuiper(x, y) <= 1


def test_confidence_conventions():
    assert confidence("ks", 0.3) == pytest.approx(0.7)
    assert confidence("kuiper", 0.4) == pytest.approx(0.8)
    assert confidence("wasserstein", 0.0, scale=2.0) == 1.0
    assert confidence("cvm", 1.0, scale=1.0) == pytest.approx(math.exp(-1))
    with pytest.raises(GateError):
        confidence("ad", 1.0)
    with pytest.raises(GateError):
        confidence("chi2", 0.1)


@pytest.mark.parametrize("measure", MEASURES)
def test_identical_samples_proceed(measure):
    x = fs(np.linspace(-2, 2, 40))
    dist, dec = gate(x, x, measure)
    assert dist.value == 0.0 and dist.confidence == 1.0
    assert dec.action == PROCEED and dec.measure == measure


@pytest.mark.parametrize("conf, action", [(0.3, MANUAL), (0.7, RECAPTURE), (0.9, PROCEED), (0.6, RECAPTURE), (0.0, MANUAL), (1.0, PROCEED)])
def test_decision_examples(conf, action):
    assert decide(conf).action == action


def test_threshold_validation():
    for lo, hi in ((0.9, 0.6), (0.5, 0.5), (-0.1, 0.5), (0.2, 1.1)):
        with pytest.raises(GateError):
            GateThresholds(lo, hi)
    with pytest.raises(GateError):
        decide(1.2)


def test_sample_validation():
    with pytest.raises(GateError, match="empty"):
        FeatureSample((), "x")
    with pytest.raises(GateError, match="non-finite"):
        FeatureSample((1.0, float("nan")), "x")
    with pytest.raises(GateError, match="at least 8"):
        ecdf_distance("ks", fs(range(10)), fs(range(5)))
    with pytest.raises(GateError, match="unknown measure"):
        ecdf_distance("xx", fs(range(10)), fs(range(10)))


def test_scale_fallbacks():
    # zero IQR falls back to the standard deviation
    t = fs([0.0] * 9 + [10.0] * 1)
    rep = ecdf_distance("wasserstein", t, fs([1.0] * 10))
    assert rep.confidence == pytest.approx(math.exp(-rep.value / float(np.std(t.array()))))
    const = fs([2.0] * 10)
    rep = ecdf_distance("wasserstein", const, fs([3.0] * 10))
    assert rep.confidence == pytest.approx(math.exp(-1.0))


def test_gate_channels_uses_minimum():
    base = fs(np.linspace(0, 1, 50))
    shifted = fs(np.linspace(0.3, 1.3, 50))
    reports, dec = gate_channels([base, base], [base, shifted])
    assert dec.confidence == min(r.confidence for r in reports) == reports[1].confidence
    with pytest.raises(GateError):
        gate_channels([base], [])


def test_action_monotone_in_shift():
    rng = np.random.default_rng(11)
    trusted = fs(rng.normal(size=1000))
    base = rng.normal(size=384)
    rank = {MANUAL: 0, RECAPTURE: 1, PROCEED: 2}
    seen = [rank[gate(trusted, fs(base + s))[1].action] for s in np.linspace(0, 2, 21)]
    assert seen == sorted(seen, reverse=True)
