"""Desk-scale simulator of statistical key exchange over noisy resistor pairs.

Two switched resistances per wire end, thermal noise as the carrier, and the
observation that the two mixed connections are indistinguishable from the
wire: that is the whole secure primitive.  On top of it this package models
sessions that accumulate shared bits, a passive observer trying to beat the
coin flip, a distance-to-rate law for practical wire runs and a scripted
roadside network that moves the resulting key material to vehicles through
authority-fed gate units.

Everything is deterministic under a single 64-bit seed; see `noise.derive_seed`
for the substream scheme.
"""

from .channel import (
    CASE_BY_BITS,
    ChannelConfig,
    DecisionRule,
    LevelClass,
    RoundRecord,
    decide_level,
    generator_variance,
    loop_samples,
    run_round,
)
from .errors import ConfigError, KljnError, UsageError
from .eve import (
    EveObservation,
    EveVerdict,
    LeakStats,
    guess_case,
    leak_report,
    mid_null_distribution,
    mid_statistic,
    observe,
)
from .noise import MsEstimate, NoiseSpec, derive_seed, gen_noise, mean_square
from .protocol import (
    BerEstimate,
    KeyMaterial,
    LinkModel,
    SessionConfig,
    SessionStats,
    bits_to_hex,
    build_ber_table,
    estimate_ber,
    key_rate,
    run_session,
    verify_keys,
)

__version__ = "0.1.0"

__all__ = [
    "CASE_BY_BITS",
    "ChannelConfig",
    "DecisionRule",
    "LevelClass",
    "RoundRecord",
    "decide_level",
    "generator_variance",
    "loop_samples",
    "run_round",
    "ConfigError",
    "KljnError",
    "UsageError",
    "EveObservation",
    "EveVerdict",
    "LeakStats",
    "guess_case",
    "leak_report",
    "mid_null_distribution",
    "mid_statistic",
    "observe",
    "MsEstimate",
    "NoiseSpec",
    "derive_seed",
    "gen_noise",
    "mean_square",
    "BerEstimate",
    "KeyMaterial",
    "LinkModel",
    "SessionConfig",
    "SessionStats",
    "bits_to_hex",
    "build_ber_table",
    "estimate_ber",
    "key_rate",
    "run_session",
    "verify_keys",
    "__version__",
]
