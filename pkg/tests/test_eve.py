import json

import jsonschema
import numpy as np
import pytest
from scipy.stats import binomtest

from kljnsim.channel import ChannelConfig, LevelClass, run_round
from kljnsim.errors import UsageError
from kljnsim.eve import (
    EveVerdict,
    guess_case,
    leak_report,
    mid_null_distribution,
    mid_statistic,
    observe,
)
from kljnsim.noise import derive_seed
from kljnsim.report import load_schema


def test_observe_requires_retained_samples():
    rec = run_round(ChannelConfig(gamma=10), 0, 1, seed=3)
    with pytest.raises(UsageError):
        observe(rec)


def test_observer_estimates_equal_wire_estimates_exactly():
    rec = run_round(ChannelConfig(gamma=30), 1, 0, seed=4, retain_samples=True)
    obs = observe(rec, round_index=17)
    assert obs.round_index == 17
    assert obs.ms_voltage == rec.ms_voltage
    assert obs.ms_current == rec.ms_current


def test_public_low_round_read_correctly_at_high_gamma():
    cfg = ChannelConfig(gamma=10**4)
    rec = run_round(cfg, 0, 0, derive_seed(41, "round"), retain_samples=True)
    obs = observe(rec)
    low = cfg.voltage_levels()[LevelClass.LOW]
    assert abs(obs.ms_voltage.mean_square / low - 1.0) < 0.05
    verdict = guess_case(obs, cfg)
    assert verdict.guessed_case == "00"
    assert 0.0 < verdict.confidence <= 1.0


def test_public_high_round_guessed_as_11():
    cfg = ChannelConfig(gamma=2000)
    rec = run_round(cfg, 1, 1, derive_seed(43, "round"), retain_samples=True)
    verdict = guess_case(observe(rec), cfg)
    assert verdict.guessed_case == "11"


def test_secure_round_guess_is_a_direction_with_damped_confidence():
    cfg = ChannelConfig(gamma=2000)
    rec = run_round(cfg, 0, 1, derive_seed(44, "round"), retain_samples=True)
    assert rec.decision is LevelClass.MID
    obs = observe(rec)
    verdict = guess_case(obs, cfg, null_stats=mid_null_distribution(cfg, 100, seed=8))
    assert verdict.guessed_case in ("01", "10")
    assert verdict.statistic == pytest.approx(mid_statistic(obs))
    # direction weight is at most 1, posterior of the shared level at most 1
    assert 0.0 < verdict.confidence <= 1.0


def test_mid_null_distribution_shape_and_determinism():
    cfg = ChannelConfig(gamma=20)
    a = mid_null_distribution(cfg, n_resamples=64, seed=5)
    b = mid_null_distribution(cfg, n_resamples=64, seed=5)
    assert a.shape == (64,)
    assert np.array_equal(a, b)
    assert np.all(np.diff(a) >= 0)
    with pytest.raises(UsageError):
        mid_null_distribution(cfg, n_resamples=1)


def test_secure_guess_accuracy_consistent_with_coin_flip():
    # 2000 mixed-connection rounds; the hit count must not be distinguishable
    # from Binomial(n, 1/2) at the 1% level, and the interval must cover 1/2.
    cfg = ChannelConfig()
    null = mid_null_distribution(cfg)
    rng = np.random.default_rng(derive_seed(29, "bits"))
    pairs = []
    for k in range(2000):
        a = int(rng.integers(2))
        rec = run_round(cfg, a, 1 - a, derive_seed(29, "round", k), retain_samples=True)
        pairs.append((rec, guess_case(observe(rec, k), cfg, null_stats=null)))
    hits = sum(v.guessed_case == f"{r.alice_bit}{r.bob_bit}" for r, v in pairs)
    assert binomtest(hits, 2000, 0.5).pvalue > 0.01
    stats = leak_report(pairs)
    assert stats.ci_low <= 0.5 <= stats.ci_high


def test_mixed_population_public_cases_read_almost_surely():
    cfg = ChannelConfig()
    null = mid_null_distribution(cfg)
    pairs = []
    k = 0
    for a in (0, 1):
        for b in (0, 1):
            for _ in range(2500):
                rec = run_round(cfg, a, b, derive_seed(23, "round", k), retain_samples=True)
                pairs.append((rec, guess_case(observe(rec, k), cfg, null_stats=null)))
                k += 1
    stats = leak_report(pairs)
    assert stats.n_rounds == 10000
    assert stats.accuracy_by_case["00"] >= 0.99
    assert stats.accuracy_by_case["11"] >= 0.99
    assert stats.ci_low <= 0.5 <= stats.ci_high
    jsonschema.validate(stats.to_dict(), load_schema("leak_report"))


def test_leak_report_without_secure_rounds_reports_absence():
    cfg = ChannelConfig(gamma=50)
    pairs = []
    for k, (a, b) in enumerate([(0, 0), (1, 1), (0, 0)]):
        rec = run_round(cfg, a, b, derive_seed(47, "round", k), retain_samples=True)
        pairs.append((rec, guess_case(observe(rec, k), cfg)))
    stats = leak_report(pairs)
    assert stats.secure_accuracy is None
    assert stats.ci_low is None and stats.ci_high is None
    assert set(stats.accuracy_by_case) == {"00", "11"}
    payload = stats.to_dict()
    jsonschema.validate(payload, load_schema("leak_report"))
    json.dumps(payload)  # serializable as-is


def test_leak_report_rejects_empty_input():
    with pytest.raises(UsageError):
        leak_report([])


def test_verdict_fields():
    v = EveVerdict(guessed_case="00", confidence=0.9)
    assert v.statistic is None
