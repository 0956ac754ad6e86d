"""Bit exchange sessions over the simulated wire, and the distance/rate law.

Per round both ends draw a private uniform bit and the wire runs one bit
period.  Rounds whose measured level is the shared middle one are kept: the
first end appends its own bit, the second appends the inverse of its own,
and because a true middle-level round means the bits differ, both ends
append the same value without ever announcing a bit.  Outer-level rounds are
public and discarded.  A misread outer round that lands on the middle level
slips a mismatched bit into the two strings; there is no reconciliation
layer here, `verify_keys` surfaces such defects.

Rate law for a wire of length L: the exchange bandwidth is capped by the
propagation time as b = v_prop / (margin * L), the bit rate is f = b / gamma
and kept secure bits arrive at f / 2 discounted by the decision error rate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelConfig, DecisionRule, LevelClass, decide_level, run_round
from .errors import ConfigError, UsageError
from .noise import derive_seed

ALL_RULES = (DecisionRule.VOLTAGE, DecisionRule.CURRENT, DecisionRule.COMBINED)
KEY_LIFETIME_DEFAULT_S = 300.0


@dataclass(frozen=True)
class SessionConfig:
    """Parameters of one key-exchange session."""

    channel: ChannelConfig = field(default_factory=ChannelConfig)
    target_bits: int = 128
    max_rounds: int = 4096
    rule: DecisionRule = DecisionRule.COMBINED
    link_id: str = "wire-0"
    lifetime_s: float = KEY_LIFETIME_DEFAULT_S

    def __post_init__(self):
        if int(self.target_bits) != self.target_bits or self.target_bits < 1:
            raise ConfigError(f"target_bits must be a positive integer, got {self.target_bits!r}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be a positive integer, got {self.max_rounds!r}")
        if not self.lifetime_s > 0.0:
            raise ConfigError(f"lifetime_s must be > 0, got {self.lifetime_s!r}")


@dataclass(frozen=True)
class KeyMaterial:
    """An ordered bit string with provenance and an expiry horizon."""

    bits: str
    link_id: str
    created_at: float
    lifetime_s: float
    rounds_used: int


@dataclass(frozen=True)
class SessionStats:
    rounds_total: int
    rounds_secure: int
    rounds_discarded: int
    rounds_error: int
    bits_delivered: int
    target_reached: bool
    effective_key_rate: float
    decision_counts: dict

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["decision_counts"] = {str(k): v for k, v in self.decision_counts.items()}
        return d


def run_session(
    cfg: SessionConfig,
    seed: int,
    bit_pairs: Optional[Iterable[tuple]] = None,
) -> tuple:
    """Run rounds until the target is met or the round budget runs out.

    Returns (alice_key, bob_key, stats).  Bits default to independent
    uniform draws per end; `bit_pairs` substitutes a scripted sequence for
    testing.  Exhausting `max_rounds` (or a scripted sequence) short of the
    target yields a partial key flagged by `stats.target_reached`, not an
    exception.
    """
    forced = iter(bit_pairs) if bit_pairs is not None else None
    rng_a = np.random.default_rng(derive_seed(seed, "bits-a"))
    rng_b = np.random.default_rng(derive_seed(seed, "bits-b"))

    alice_bits: list = []
    bob_bits: list = []
    rounds = secure = errors = 0
    counts = {cls: 0 for cls in LevelClass}
    while len(alice_bits) < cfg.target_bits and rounds < cfg.max_rounds:
        if forced is not None:
            try:
                a, b = next(forced)
            except StopIteration:
                break
        else:
            a = int(rng_a.integers(2))
            b = int(rng_b.integers(2))
        rec = run_round(cfg.channel, a, b, derive_seed(seed, "round", rounds), rule=cfg.rule)
        rounds += 1
        secure += int(rec.secure)
        errors += int(rec.error)
        counts[rec.decision] += 1
        if rec.decision is LevelClass.MID:
            # Inverse-bit convention: a true MID round means b == 1 - a.
            alice_bits.append(str(a))
            bob_bits.append(str(1 - b))

    delivered = len(alice_bits)
    bit_period = cfg.channel.gamma / cfg.channel.b_kljn
    rate = delivered / (rounds * bit_period) if rounds else 0.0
    stats = SessionStats(
        rounds_total=rounds,
        rounds_secure=secure,
        rounds_discarded=rounds - delivered,
        rounds_error=errors,
        bits_delivered=delivered,
        target_reached=delivered >= cfg.target_bits,
        effective_key_rate=rate,
        decision_counts={cls.value: counts[cls] for cls in LevelClass},
    )
    make = lambda bits: KeyMaterial(
        bits="".join(bits),
        link_id=cfg.link_id,
        created_at=0.0,
        lifetime_s=cfg.lifetime_s,
        rounds_used=rounds,
    )
    return make(alice_bits), make(bob_bits), stats


def verify_keys(alice_key, bob_key) -> list:
    """Indices where the two bit strings disagree; error on length mismatch."""
    a = alice_key.bits if isinstance(alice_key, KeyMaterial) else str(alice_key)
    b = bob_key.bits if isinstance(bob_key, KeyMaterial) else str(bob_key)
    if len(a) != len(b):
        raise UsageError(f"key lengths differ: {len(a)} vs {len(b)}")
    return [i for i, (x, y) in enumerate(zip(a, b)) if x != y]


def bits_to_hex(bits: str) -> str:
    """Bit string to hex, most significant bit first.

    A final incomplete nibble is zero-padded on the right; the caller keeps
    the bit length if it matters.
    """
    if bits == "":
        return ""
    if set(bits) - {"0", "1"}:
        raise UsageError(f"not a bit string: {bits[:16]!r}...")
    pad = (-len(bits)) % 4
    padded = bits + "0" * pad
    return f"{int(padded, 2):0{len(padded) // 4}x}"


@dataclass(frozen=True)
class LinkModel:
    """Distance-to-rate model of one exchange wire.

    The exchange bandwidth must stay well under the wave propagation limit
    of the wire, expressed as bandwidth = v_prop / (margin * length).
    `ber_table` maps gamma to a decision error rate; None means the ideal
    error-free discount of 1.
    """

    v_prop: float = 2.0e8
    margin: float = 100.0
    ber_table: Optional[Mapping[int, float]] = None

    def __post_init__(self):
        if not self.v_prop > 0.0:
            raise ConfigError(f"v_prop must be > 0, got {self.v_prop!r}")
        if not self.margin >= 1.0:
            raise ConfigError(f"margin must be >= 1, got {self.margin!r}")

    def bandwidth(self, wire_length: float) -> float:
        if not wire_length > 0.0:
            raise ConfigError(f"wire_length must be > 0, got {wire_length!r}")
        return self.v_prop / (self.margin * wire_length)

    def error_rate(self, gamma: int) -> float:
        if self.ber_table is None:
            return 0.0
        try:
            return float(self.ber_table[int(gamma)])
        except KeyError:
            raise UsageError(f"ber_table has no entry for gamma={gamma}") from None


def key_rate(cfg: ChannelConfig, wire_length: float, link: LinkModel) -> float:
    """Secure bits per second on a wire of the given length.

    Half of the rounds land on the shared level, and of those only the
    correctly decided ones deliver, hence f_bit * 0.5 * (1 - error rate).
    """
    f_bit = link.bandwidth(wire_length) / cfg.gamma
    return f_bit * 0.5 * (1.0 - link.error_rate(cfg.gamma))


@dataclass(frozen=True)
class BerEstimate:
    rule: DecisionRule
    error_rate: float
    ci_low: float
    ci_high: float
    errors: int
    trials: int


def estimate_ber(
    cfg: ChannelConfig,
    trials: int,
    seed: int,
    rules: Sequence[DecisionRule] = ALL_RULES,
) -> dict:
    """Monte-Carlo decision error rates, one estimate per rule.

    All rules are scored on the same simulated rounds, so cross-rule
    comparisons are paired.  Returns {rule: BerEstimate} with 95% Wilson
    intervals.
    """
    if int(trials) != trials or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    rules = tuple(DecisionRule(r) for r in rules)
    rng = np.random.default_rng(derive_seed(seed, "ber-bits"))
    bits = rng.integers(0, 2, size=(int(trials), 2))
    errors = {rule: 0 for rule in rules}
    for i in range(int(trials)):
        a, b = int(bits[i, 0]), int(bits[i, 1])
        rec = run_round(cfg, a, b, derive_seed(seed, "ber-round", i))
        for rule in rules:
            got = decide_level(rec.ms_voltage, rec.ms_current, cfg, rule)
            errors[rule] += int(got is not rec.case)
    out = {}
    for rule in rules:
        ci = binomtest(errors[rule], int(trials)).proportion_ci(
            confidence_level=0.95, method="wilson"
        )
        out[rule] = BerEstimate(
            rule=rule,
            error_rate=errors[rule] / int(trials),
            ci_low=float(ci.low),
            ci_high=float(ci.high),
            errors=errors[rule],
            trials=int(trials),
        )
    return out


def build_ber_table(
    cfg: ChannelConfig,
    gammas: Sequence[int],
    trials: int,
    seed: int,
    rule: DecisionRule = DecisionRule.COMBINED,
) -> dict:
    """Per-gamma error rates for `LinkModel.ber_table`, one MC run per gamma."""
    table = {}
    for gamma in gammas:
        sub = dataclasses.replace(cfg, gamma=int(gamma))
        est = estimate_ber(sub, trials, derive_seed(seed, "table", int(gamma)), rules=(rule,))
        table[int(gamma)] = est[rule].error_rate
    return table
