"""One shared wire, two switched resistor pairs: the core exchange channel.

Both ends of the wire hold a low and a high resistor.  Per bit period each
end connects one of them, chosen by its private bit (0 selects the low
resistor, 1 the high one), in series with that resistor's thermal noise
generator.  An observer of the wire sees the Kirchhoff superposition

    wire_voltage = (u_a * r_b + u_b * r_a) / (r_a + r_b)
    loop_current = (u_a - u_b) / (r_a + r_b)

whose mean squares sit on one of three levels:

    <u_w^2> = 4 k T B * (r_a * r_b) / (r_a + r_b)     (parallel resistance)
    <i_w^2> = 4 k T B / (r_a + r_b)                   (series resistance)

The 00 and 11 connections produce distinct outer levels and are public.  The
01 and 10 connections share the middle level on both observables, and for
equal temperatures the voltage/current cross-covariance is exactly zero, so
the two mixed connections are statistically identical on the wire: a passive
observer cannot tell which end holds which resistor.  The two ends can,
because each knows its own bit.

Normalized units: BOLTZMANN_NORM is chosen so that 4 k T B == 1 at the
default temperature and bandwidth, making generator variances numerically
equal to resistances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, UsageError
from .noise import MsEstimate, NoiseSpec, derive_seed, gen_noise, mean_square

T_EFF_DEFAULT = 1.0
B_KLJN_DEFAULT = 2.0e6
# Pins 4 * k * t_eff * b_kljn to 1 at the defaults above.
BOLTZMANN_NORM = 1.0 / (4.0 * T_EFF_DEFAULT * B_KLJN_DEFAULT)


class LevelClass(str, enum.Enum):
    """Mean-square level classes of the wire observables."""

    LOW = "LOW"
    MID = "MID"
    HIGH = "HIGH"


class DecisionRule(str, enum.Enum):
    """How a bit-period measurement is classified onto a level."""

    VOLTAGE = "VOLTAGE"
    CURRENT = "CURRENT"
    COMBINED = "COMBINED"


# Connection case by (bit_a, bit_b).  Mixed connections share MID.
CASE_BY_BITS = {
    (0, 0): LevelClass.LOW,
    (0, 1): LevelClass.MID,
    (1, 0): LevelClass.MID,
    (1, 1): LevelClass.HIGH,
}


@dataclass(frozen=True)
class ChannelConfig:
    """Static channel parameters.

    r_low / r_high are the two switched resistances (ohm), t_eff the common
    effective noise temperature, b_kljn the shared exchange bandwidth (Hz),
    gamma the integer ratio of exchange bandwidth to bit rate.  A bit period
    holds n_bit = 2 * gamma Nyquist-rate samples.
    """

    r_low: float = 1.0e3
    r_high: float = 1.0e4
    t_eff: float = T_EFF_DEFAULT
    b_kljn: float = B_KLJN_DEFAULT
    gamma: int = 200

    def __post_init__(self):
        if not 0.0 < self.r_low < self.r_high:
            raise ConfigError(
                f"need 0 < r_low < r_high, got r_low={self.r_low!r} r_high={self.r_high!r}"
            )
        if not self.t_eff > 0.0:
            raise ConfigError(f"t_eff must be > 0, got {self.t_eff!r}")
        if not self.b_kljn > 0.0:
            raise ConfigError(f"b_kljn must be > 0, got {self.b_kljn!r}")
        if int(self.gamma) != self.gamma or self.gamma < 2:
            raise ConfigError(f"gamma must be an integer >= 2, got {self.gamma!r}")

    @property
    def n_bit(self) -> int:
        return 2 * int(self.gamma)

    @property
    def noise_scale(self) -> float:
        """4 k T B in normalized units; 1.0 at the defaults."""
        return 4.0 * BOLTZMANN_NORM * self.t_eff * self.b_kljn

    def resistor(self, bit: int) -> float:
        if bit not in (0, 1):
            raise UsageError(f"bit must be 0 or 1, got {bit!r}")
        return self.r_high if bit else self.r_low

    def voltage_levels(self) -> dict:
        """Analytic wire-voltage mean squares per level class (increasing)."""
        s = self.noise_scale
        r0, r1 = self.r_low, self.r_high
        return {
            LevelClass.LOW: s * r0 / 2.0,
            LevelClass.MID: s * r0 * r1 / (r0 + r1),
            LevelClass.HIGH: s * r1 / 2.0,
        }

    def current_levels(self) -> dict:
        """Analytic loop-current mean squares per class (decreasing in class)."""
        s = self.noise_scale
        r0, r1 = self.r_low, self.r_high
        return {
            LevelClass.LOW: s / (2.0 * r0),
            LevelClass.MID: s / (r0 + r1),
            LevelClass.HIGH: s / (2.0 * r1),
        }

    def voltage_thresholds(self) -> tuple:
        """Geometric-mean voltage thresholds (low/mid, mid/high)."""
        lv = self.voltage_levels()
        return (
            math.sqrt(lv[LevelClass.LOW] * lv[LevelClass.MID]),
            math.sqrt(lv[LevelClass.MID] * lv[LevelClass.HIGH]),
        )

    def current_thresholds(self) -> tuple:
        """Geometric-mean current thresholds (low/mid, mid/high); decreasing."""
        lv = self.current_levels()
        return (
            math.sqrt(lv[LevelClass.LOW] * lv[LevelClass.MID]),
            math.sqrt(lv[LevelClass.MID] * lv[LevelClass.HIGH]),
        )


def generator_variance(r: float, cfg: ChannelConfig) -> float:
    """Johnson-Nyquist variance 4 k t_eff r b_kljn of one generator.

    In normalized units the default configuration returns r itself, so the
    variance ratio of the two resistors equals their resistance ratio.
    """
    if not r > 0.0:
        raise ConfigError(f"resistance must be > 0, got {r!r}")
    return cfg.noise_scale * r


def loop_samples(u_a, u_b, r_a: float, r_b: float):
    """Kirchhoff superposition of the two generator voltage arrays.

    Returns (wire_voltage, loop_current) arrays of the input length.
    """
    if not (r_a > 0.0 and r_b > 0.0):
        raise ConfigError(f"resistances must be > 0, got r_a={r_a!r} r_b={r_b!r}")
    ua = np.asarray(u_a, dtype=float)
    ub = np.asarray(u_b, dtype=float)
    if ua.shape != ub.shape:
        raise UsageError(f"sample arrays differ in shape: {ua.shape} vs {ub.shape}")
    denom = r_a + r_b
    return (ua * r_b + ub * r_a) / denom, (ua - ub) / denom


@dataclass(frozen=True)
class RoundRecord:
    """Outcome of one bit period on the wire.

    `case` is the true level class implied by the bits, `decision` the class
    the configured rule inferred from the mean squares, `error` their
    disagreement.  Wire samples are retained only on request; an observer
    model needs them, bulk statistics do not.
    """

    alice_bit: int
    bob_bit: int
    case: LevelClass
    ms_voltage: MsEstimate
    ms_current: MsEstimate
    decision: LevelClass
    error: bool
    seed: int
    wire_voltage: Optional[np.ndarray] = None
    loop_current: Optional[np.ndarray] = None

    @property
    def secure(self) -> bool:
        """True when the bits differ, i.e. the wire sits on the shared level."""
        return self.alice_bit != self.bob_bit


def decide_level(
    ms_voltage: MsEstimate,
    ms_current: MsEstimate,
    cfg: ChannelConfig,
    rule: DecisionRule = DecisionRule.COMBINED,
) -> LevelClass:
    """Classify a bit-period measurement onto a level class.

    VOLTAGE and CURRENT threshold their single observable at the geometric
    means of adjacent analytic levels (current levels decrease with class).
    COMBINED picks the class maximizing the product of per-observable
    Gaussian likelihoods, using the chi-square moments of a mean square over
    n samples (mean = level, variance = 2 * level^2 / n).  Exact likelihood
    ties resolve toward MID.
    """
    rule = DecisionRule(rule)
    if rule is DecisionRule.VOLTAGE:
        t_lm, t_mh = cfg.voltage_thresholds()
        v = ms_voltage.mean_square
        if v < t_lm:
            return LevelClass.LOW
        return LevelClass.MID if v < t_mh else LevelClass.HIGH
    if rule is DecisionRule.CURRENT:
        t_lm, t_mh = cfg.current_thresholds()
        c = ms_current.mean_square
        if c > t_lm:
            return LevelClass.LOW
        return LevelClass.MID if c > t_mh else LevelClass.HIGH

    v_levels = cfg.voltage_levels()
    c_levels = cfg.current_levels()
    best, best_ll = None, -math.inf
    # MID first so that exact ties keep the secure reading.
    for cls in (LevelClass.MID, LevelClass.LOW, LevelClass.HIGH):
        ll = _gaussian_loglik(ms_voltage, v_levels[cls]) + _gaussian_loglik(
            ms_current, c_levels[cls]
        )
        if ll > best_ll:
            best, best_ll = cls, ll
    return best


def _gaussian_loglik(est: MsEstimate, level: float) -> float:
    var = 2.0 * level * level / est.n
    d = est.mean_square - level
    return -0.5 * d * d / var - 0.5 * math.log(var)


def run_round(
    cfg: ChannelConfig,
    alice_bit: int,
    bob_bit: int,
    seed: int,
    rule: DecisionRule = DecisionRule.COMBINED,
    retain_samples: bool = False,
) -> RoundRecord:
    """Simulate one bit period and classify it.

    Deterministic in (cfg, bits, seed): the two generator streams are derived
    from the round seed by label, so repeated calls reproduce bit-identical
    samples.
    """
    r_a = cfg.resistor(alice_bit)
    r_b = cfg.resistor(bob_bit)
    u_a = gen_noise(NoiseSpec(generator_variance(r_a, cfg), cfg.n_bit, derive_seed(seed, "end-a")))
    u_b = gen_noise(NoiseSpec(generator_variance(r_b, cfg), cfg.n_bit, derive_seed(seed, "end-b")))
    wire_v, loop_i = loop_samples(u_a, u_b, r_a, r_b)
    ms_v = mean_square(wire_v)
    ms_i = mean_square(loop_i)
    decision = decide_level(ms_v, ms_i, cfg, rule)
    case = CASE_BY_BITS[(alice_bit, bob_bit)]
    return RoundRecord(
        alice_bit=alice_bit,
        bob_bit=bob_bit,
        case=case,
        ms_voltage=ms_v,
        ms_current=ms_i,
        decision=decision,
        error=decision is not case,
        seed=seed,
        wire_voltage=wire_v if retain_samples else None,
        loop_current=loop_i if retain_samples else None,
    )
