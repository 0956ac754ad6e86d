import math

import numpy as np
import pytest

from kljnsim.channel import (
    CASE_BY_BITS,
    ChannelConfig,
    DecisionRule,
    LevelClass,
    decide_level,
    generator_variance,
    loop_samples,
    run_round,
)
from kljnsim.errors import ConfigError, UsageError
from kljnsim.noise import MsEstimate, derive_seed


def test_config_validation():
    with pytest.raises(ConfigError):
        ChannelConfig(r_low=10.0, r_high=10.0)
    with pytest.raises(ConfigError):
        ChannelConfig(r_low=-1.0)
    with pytest.raises(ConfigError):
        ChannelConfig(t_eff=0.0)
    with pytest.raises(ConfigError):
        ChannelConfig(b_kljn=0.0)
    with pytest.raises(ConfigError):
        ChannelConfig(gamma=1)
    with pytest.raises(ConfigError):
        ChannelConfig(gamma=2.5)


def test_defaults_normalization_and_sampling():
    cfg = ChannelConfig()
    assert cfg.n_bit == 400
    assert cfg.noise_scale == pytest.approx(1.0)
    assert cfg.resistor(0) == 1.0e3
    assert cfg.resistor(1) == 1.0e4
    with pytest.raises(UsageError):
        cfg.resistor(2)


def test_generator_variance_normalized_identity():
    cfg = ChannelConfig()
    assert generator_variance(1000.0, cfg) == pytest.approx(1000.0)
    hot = ChannelConfig(t_eff=2.0)
    assert generator_variance(1000.0, hot) == pytest.approx(2.0 * generator_variance(1000.0, cfg))
    assert generator_variance(cfg.r_high, cfg) / generator_variance(cfg.r_low, cfg) == pytest.approx(10.0)
    with pytest.raises(ConfigError):
        generator_variance(0.0, cfg)


def test_analytic_levels_default_config():
    cfg = ChannelConfig()
    v = cfg.voltage_levels()
    assert v[LevelClass.LOW] == pytest.approx(500.0)
    assert v[LevelClass.MID] == pytest.approx(1.0e3 * 1.0e4 / 1.1e4)
    assert v[LevelClass.HIGH] == pytest.approx(5000.0)
    c = cfg.current_levels()
    assert c[LevelClass.LOW] == pytest.approx(1.0 / 2000.0)
    assert c[LevelClass.MID] == pytest.approx(1.0 / 11000.0)
    assert c[LevelClass.HIGH] == pytest.approx(1.0 / 20000.0)
    # voltage increases with class, current decreases
    assert v[LevelClass.LOW] < v[LevelClass.MID] < v[LevelClass.HIGH]
    assert c[LevelClass.LOW] > c[LevelClass.MID] > c[LevelClass.HIGH]


def test_thresholds_are_geometric_means():
    cfg = ChannelConfig()
    v = cfg.voltage_levels()
    t_lm, t_mh = cfg.voltage_thresholds()
    assert t_lm == pytest.approx(math.sqrt(v[LevelClass.LOW] * v[LevelClass.MID]))
    assert t_mh == pytest.approx(math.sqrt(v[LevelClass.MID] * v[LevelClass.HIGH]))
    assert v[LevelClass.LOW] < t_lm < v[LevelClass.MID] < t_mh < v[LevelClass.HIGH]


def test_loop_samples_symmetric_constant_inputs():
    v, i = loop_samples(np.full(5, 3.0), np.full(5, 3.0), 700.0, 700.0)
    assert np.allclose(v, 3.0)
    assert np.allclose(i, 0.0)


def test_loop_samples_voltage_divider():
    v, i = loop_samples(np.array([1.0]), np.array([0.0]), 1.0, 1.0)
    assert v[0] == pytest.approx(0.5)
    assert i[0] == pytest.approx(0.5)


def test_loop_samples_input_validation():
    with pytest.raises(UsageError):
        loop_samples(np.zeros(3), np.zeros(4), 1.0, 1.0)
    with pytest.raises(ConfigError):
        loop_samples(np.zeros(3), np.zeros(3), 0.0, 1.0)


def test_case_table_and_secure_flag():
    assert CASE_BY_BITS[(0, 0)] is LevelClass.LOW
    assert CASE_BY_BITS[(0, 1)] is LevelClass.MID
    assert CASE_BY_BITS[(1, 0)] is LevelClass.MID
    assert CASE_BY_BITS[(1, 1)] is LevelClass.HIGH
    cfg = ChannelConfig(gamma=10)
    assert run_round(cfg, 0, 1, seed=1).secure
    assert not run_round(cfg, 1, 1, seed=1).secure


def test_decide_level_on_level_inputs():
    cfg = ChannelConfig()
    v = cfg.voltage_levels()
    c = cfg.current_levels()
    n = cfg.n_bit
    on_mid_v = MsEstimate(v[LevelClass.MID], n)
    on_mid_i = MsEstimate(c[LevelClass.MID], n)
    for rule in DecisionRule:
        assert decide_level(on_mid_v, on_mid_i, cfg, rule) is LevelClass.MID
    on_low_v = MsEstimate(v[LevelClass.LOW], n)
    on_low_i = MsEstimate(c[LevelClass.LOW], n)
    for rule in DecisionRule:
        assert decide_level(on_low_v, on_low_i, cfg, rule) is LevelClass.LOW


def test_decide_level_rejects_unknown_rule():
    cfg = ChannelConfig()
    est = MsEstimate(1.0, 10)
    with pytest.raises(ValueError):
        decide_level(est, est, cfg, "MAJORITY")


def test_run_round_deterministic_in_seed():
    cfg = ChannelConfig(gamma=25)
    s = derive_seed(5, "det")
    r1 = run_round(cfg, 0, 1, s, retain_samples=True)
    r2 = run_round(cfg, 0, 1, s, retain_samples=True)
    assert r1.ms_voltage == r2.ms_voltage
    assert r1.ms_current == r2.ms_current
    assert np.array_equal(r1.wire_voltage, r2.wire_voltage)
    assert r1.wire_voltage.shape == (cfg.n_bit,)
    r3 = run_round(cfg, 0, 1, s + 1)
    assert r3.ms_voltage != r1.ms_voltage
    assert r3.wire_voltage is None


def test_run_round_rejects_non_binary_bits():
    with pytest.raises(UsageError):
        run_round(ChannelConfig(gamma=10), 2, 0, seed=1)


def test_high_gamma_rounds_essentially_error_free():
    # 1000 independent rounds at gamma = 1e4; at this statistics quality a
    # misread is a multi-sigma event, so at most one error is tolerated.
    cfg = ChannelConfig(gamma=10**4)
    rng = np.random.default_rng(derive_seed(7, "bits"))
    errors = 0
    for k in range(1000):
        a, b = int(rng.integers(2)), int(rng.integers(2))
        errors += int(run_round(cfg, a, b, derive_seed(7, "round", k)).error)
    assert errors <= 1
