import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kljnsim.channel import ChannelConfig, DecisionRule
from kljnsim.errors import ConfigError, UsageError
from kljnsim.noise import derive_seed
from kljnsim.protocol import (
    ALL_RULES,
    BerEstimate,
    LinkModel,
    SessionConfig,
    bits_to_hex,
    build_ber_table,
    estimate_ber,
    key_rate,
    run_session,
    verify_keys,
)


def test_session_config_validation():
    with pytest.raises(ConfigError):
        SessionConfig(target_bits=0)
    with pytest.raises(ConfigError):
        SessionConfig(max_rounds=0)
    with pytest.raises(ConfigError):
        SessionConfig(lifetime_s=0.0)


def test_forced_secure_round_yields_identical_single_bit():
    cfg = SessionConfig(channel=ChannelConfig(), target_bits=1, max_rounds=8)
    alice, bob, stats = run_session(cfg, seed=5, bit_pairs=[(0, 1)])
    # one end records its own bit, the other the inverse of its own
    assert alice.bits == "0"
    assert bob.bits == "0"
    assert stats.rounds_total == 1
    assert stats.rounds_secure == 1
    assert stats.target_reached


def test_forced_identical_bits_never_deliver():
    cfg = SessionConfig(channel=ChannelConfig(gamma=20), target_bits=10, max_rounds=100)
    alice, bob, stats = run_session(cfg, seed=6, bit_pairs=[(0, 0)] * 50)
    assert alice.bits == "" and bob.bits == ""
    assert stats.rounds_secure == 0
    assert stats.bits_delivered == 0
    assert not stats.target_reached
    assert stats.rounds_total == 50  # scripted sequence exhausted, flagged not raised


def test_session_stats_are_internally_consistent():
    cfg = SessionConfig(channel=ChannelConfig(gamma=50), target_bits=32)
    alice, bob, stats = run_session(cfg, seed=11)
    assert verify_keys(alice, bob) == []
    assert len(alice.bits) == stats.bits_delivered == 32
    assert stats.rounds_secure <= stats.rounds_total
    assert stats.rounds_discarded == stats.rounds_total - stats.bits_delivered
    assert sum(stats.decision_counts.values()) == stats.rounds_total
    bit_period = cfg.channel.gamma / cfg.channel.b_kljn
    assert stats.effective_key_rate == pytest.approx(
        stats.bits_delivered / (stats.rounds_total * bit_period)
    )
    assert alice.rounds_used == stats.rounds_total >= 2 * 32 * 0.5  # half the rounds discard


def test_mean_rounds_to_128_bits_across_sessions():
    cfg = SessionConfig(channel=ChannelConfig(), target_bits=128, max_rounds=4096)
    totals = [run_session(cfg, derive_seed(31, "session", k))[2].rounds_total for k in range(10)]
    mean = float(np.mean(totals))
    assert 240 <= mean <= 288


def test_completed_key_passes_monobit_frequency_check():
    cfg = SessionConfig(channel=ChannelConfig(gamma=50), target_bits=1024, max_rounds=4096)
    alice, bob, stats = run_session(cfg, 37)
    assert stats.target_reached
    ones = alice.bits.count("1") / len(alice.bits)
    assert abs(ones - 0.5) <= 4 * (0.25 / len(alice.bits)) ** 0.5


def test_high_gamma_sessions_agree_end_to_end():
    # 100 seeded 128-bit sessions at gamma = 1000; mismatching keys must be
    # at most a once-per-hundred event at this statistics quality.
    cfg = SessionConfig(channel=ChannelConfig(gamma=1000), target_bits=128, max_rounds=4096)
    clean = 0
    for k in range(100):
        alice, bob, stats = run_session(cfg, derive_seed(17, "session", k))
        clean += int(stats.target_reached and not verify_keys(alice, bob))
    assert clean >= 99


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=8), st.integers(0, 2**32))
def test_all_secure_scripts_always_agree(first_bits, seed):
    # every scripted pair is mixed, so every kept bit must match at a gamma
    # where misreads are out of reach
    pairs = [(a, 1 - a) for a in first_bits]
    cfg = SessionConfig(channel=ChannelConfig(gamma=500), target_bits=len(pairs), max_rounds=64)
    alice, bob, stats = run_session(cfg, seed, bit_pairs=pairs)
    assert alice.bits == bob.bits
    assert len(alice.bits) == stats.rounds_secure == len(pairs)


def test_verify_keys_reports_positions():
    assert verify_keys("0110", "0110") == []
    assert verify_keys("01", "00") == [1]
    with pytest.raises(UsageError):
        verify_keys("01", "011")


def test_bits_to_hex_most_significant_first():
    assert bits_to_hex("") == ""
    assert bits_to_hex("1111") == "f"
    assert bits_to_hex("00010010") == "12"
    assert bits_to_hex("1") == "8"  # right-padded final nibble
    with pytest.raises(UsageError):
        bits_to_hex("012")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("01"), min_size=1, max_size=64).map("".join))
def test_bits_to_hex_value_contract(bits):
    pad = (-len(bits)) % 4
    assert int(bits_to_hex(bits), 16) == int(bits + "0" * pad, 2)


def test_link_model_bandwidth_law():
    link = LinkModel()
    assert link.bandwidth(1000.0) == pytest.approx(2.0e8 / (100.0 * 1000.0))
    assert link.bandwidth(500.0) == pytest.approx(2.0 * link.bandwidth(1000.0))
    with pytest.raises(ConfigError):
        link.bandwidth(0.0)
    with pytest.raises(ConfigError):
        LinkModel(margin=0.5)
    with pytest.raises(ConfigError):
        LinkModel(v_prop=0.0)


def test_link_model_error_table():
    assert LinkModel().error_rate(200) == 0.0
    link = LinkModel(ber_table={200: 0.1})
    assert link.error_rate(200) == pytest.approx(0.1)
    with pytest.raises(UsageError):
        link.error_rate(50)


def test_key_rate_follows_the_distance_law():
    cfg = ChannelConfig()  # gamma 200
    link = LinkModel()  # v_prop 2e8, margin 100
    # bandwidth 2e8/(100*1000) = 2 kHz, bit rate 10 Hz, half the rounds secure
    assert key_rate(cfg, 1000.0, link) == pytest.approx(5.0)
    assert key_rate(cfg, 100.0, link) == pytest.approx(50.0)
    assert key_rate(cfg, 100.0, link) == pytest.approx(10.0 * key_rate(cfg, 1000.0, link))
    assert key_rate(cfg, 2000.0, link) == pytest.approx(0.5 * key_rate(cfg, 1000.0, link))


def test_key_rate_monotone_in_gamma_and_discounted_by_errors():
    link = LinkModel()
    r200 = key_rate(ChannelConfig(gamma=200), 1000.0, link)
    r400 = key_rate(ChannelConfig(gamma=400), 1000.0, link)
    assert r400 < r200
    lossy = LinkModel(ber_table={200: 0.1})
    assert key_rate(ChannelConfig(gamma=200), 1000.0, lossy) == pytest.approx(0.9 * r200)


def test_estimate_ber_shape_and_determinism():
    cfg = ChannelConfig(gamma=10)
    est = estimate_ber(cfg, trials=200, seed=21)
    assert set(est) == set(ALL_RULES)
    for rule, b in est.items():
        assert isinstance(b, BerEstimate)
        assert b.trials == 200
        assert 0 <= b.errors <= 200
        assert 0.0 <= b.ci_low <= b.error_rate <= b.ci_high <= 1.0
    again = estimate_ber(cfg, trials=200, seed=21)
    assert again == est
    with pytest.raises(ConfigError):
        estimate_ber(cfg, trials=0, seed=1)


def test_combined_rule_beats_single_observables_at_low_gamma():
    est = estimate_ber(ChannelConfig(gamma=10), trials=2000, seed=22)
    combined = est[DecisionRule.COMBINED].error_rate
    single = min(est[DecisionRule.VOLTAGE].error_rate, est[DecisionRule.CURRENT].error_rate)
    assert combined < single


def test_build_ber_table_feeds_link_model():
    cfg = ChannelConfig()
    table = build_ber_table(cfg, gammas=[10, 50], trials=300, seed=23)
    assert set(table) == {10, 50}
    assert all(0.0 <= v <= 1.0 for v in table.values())
    assert table[10] >= table[50]
    link = LinkModel(ber_table=table)
    assert link.error_rate(10) == table[10]
