"""Passive wire observer: what leaks from the shared line and what does not.

The observer sees exactly the wire samples the two ends used, nothing more.
Statistics applied per round (no claim of exhaustiveness, see the module
tests for the indistinguishability checks):

* mean-square voltage and current against the analytic level table, which
  identifies the public outer connections with near certainty at practical
  sample counts;
* for rounds on the shared middle level, the sign of the voltage * current
  cross-moment, offset by its expectation under symmetric operation.  That
  expectation is exactly zero for equal temperatures, so the statistic is a
  fair coin on an ideal wire and its long-run hit rate stays at one half.

Confidence for middle-level direction guesses is scored against an empirical
null distribution: the cross-moment recomputed over resampled symmetric
rounds with a permuted voltage/current pairing.  The null law at fixed
channel config is the same for every round, so one table serves a whole
study.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelConfig, LevelClass, RoundRecord, _gaussian_loglik
from .errors import UsageError
from .noise import derive_seed, mean_square

NULL_RESAMPLES = 1000
_NULL_SEED = 0x5EC0_0D1A  # fixed internal seed for the default null table

SECURE_CASES = ("01", "10")


@dataclass(frozen=True)
class EveObservation:
    """One round as seen from the wire: samples and their mean squares."""

    round_index: int
    ms_voltage: object
    ms_current: object
    wire_voltage: np.ndarray
    loop_current: np.ndarray


@dataclass(frozen=True)
class EveVerdict:
    """A case guess with an honestly calibrated confidence."""

    guessed_case: str
    confidence: float
    statistic: Optional[float] = None


def observe(record: RoundRecord, round_index: int = 0) -> EveObservation:
    """Re-derive the observer's view from a round's retained wire samples."""
    if record.wire_voltage is None or record.loop_current is None:
        raise UsageError("round was run without retain_samples; nothing to observe")
    return EveObservation(
        round_index=round_index,
        ms_voltage=mean_square(record.wire_voltage),
        ms_current=mean_square(record.loop_current),
        wire_voltage=record.wire_voltage,
        loop_current=record.loop_current,
    )


def mid_statistic(obs: EveObservation) -> float:
    """Cross-moment mean(v * i) minus its symmetric expectation (zero)."""
    return float(np.mean(obs.wire_voltage * obs.loop_current))


def mid_null_distribution(
    cfg: ChannelConfig, n_resamples: int = NULL_RESAMPLES, seed: int = _NULL_SEED
) -> np.ndarray:
    """Empirical null of the cross-moment statistic, sorted ascending.

    Each resample is a fresh symmetric secure round whose current samples are
    randomly re-paired with the voltage samples before the cross-moment is
    taken, which destroys any pairing information while keeping both
    marginals.
    """
    from .channel import run_round  # local import keeps module load light

    if n_resamples < 2:
        raise UsageError(f"need at least 2 resamples, got {n_resamples}")
    stats = np.empty(n_resamples)
    perm_rng = np.random.default_rng(derive_seed(seed, "null-pairing"))
    for k in range(n_resamples):
        rec = run_round(cfg, 0, 1, derive_seed(seed, "null-round", k), retain_samples=True)
        shuffled = rec.loop_current[perm_rng.permutation(cfg.n_bit)]
        stats[k] = float(np.mean(rec.wire_voltage * shuffled))
    return np.sort(stats)


@functools.lru_cache(maxsize=8)
def _default_null(cfg: ChannelConfig) -> np.ndarray:
    return mid_null_distribution(cfg)


def guess_case(
    obs: EveObservation,
    cfg: ChannelConfig,
    null_stats: Optional[np.ndarray] = None,
) -> EveVerdict:
    """Best passive guess of the connection case behind one round.

    Outer levels are called from the posterior over the four equiprobable
    cases (Gaussian likelihoods on both observables).  On the middle level
    the 01/10 direction follows the sign of the cross-moment; the reported
    confidence is the posterior weight of the middle level times the
    direction weight max(q, 1 - q), where q ranks the statistic in the
    empirical null.  On an ideal wire q is uniform, the direction carries no
    information and the hit rate stays at one half.
    """
    v_levels = cfg.voltage_levels()
    c_levels = cfg.current_levels()
    ll = {
        cls: _gaussian_loglik(obs.ms_voltage, v_levels[cls])
        + _gaussian_loglik(obs.ms_current, c_levels[cls])
        for cls in LevelClass
    }
    peak = max(ll.values())
    # Equal case priors; the two mixed connections share the MID likelihood.
    w = {cls: np.exp(ll[cls] - peak) for cls in LevelClass}
    total = w[LevelClass.LOW] + 2.0 * w[LevelClass.MID] + w[LevelClass.HIGH]
    post = {
        "00": w[LevelClass.LOW] / total,
        "11": w[LevelClass.HIGH] / total,
        "mid": 2.0 * w[LevelClass.MID] / total,
    }
    stat = mid_statistic(obs)
    best = max(post, key=post.get)
    if best != "mid":
        return EveVerdict(guessed_case=best, confidence=float(post[best]), statistic=stat)

    if null_stats is None:
        null_stats = _default_null(cfg)
    q = float(np.searchsorted(null_stats, stat, side="right")) / float(len(null_stats))
    direction = max(q, 1.0 - q)
    guess = "01" if stat > 0.0 else "10"
    return EveVerdict(
        guessed_case=guess,
        confidence=float(post["mid"] * direction),
        statistic=stat,
    )


@dataclass(frozen=True)
class LeakStats:
    """Aggregate observer performance over a round set."""

    accuracy_by_case: dict
    secure_accuracy: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    n_rounds: int

    def to_dict(self) -> dict:
        return {
            "accuracy_by_case": dict(self.accuracy_by_case),
            "secure_accuracy": self.secure_accuracy,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_rounds": self.n_rounds,
        }


def leak_report(pairs: Sequence[tuple]) -> LeakStats:
    """Score (RoundRecord, EveVerdict) pairs into LeakStats.

    Per-case accuracy covers the cases actually present.  secure_accuracy and
    its 95% Wilson interval cover the mixed-connection rounds only; with no
    such rounds in the input all three are absent (None).
    """
    if len(pairs) == 0:
        raise UsageError("leak_report needs at least one round")
    counts: dict = {}
    hits: dict = {}
    secure_total = 0
    secure_hits = 0
    for record, verdict in pairs:
        case = f"{record.alice_bit}{record.bob_bit}"
        counts[case] = counts.get(case, 0) + 1
        ok = verdict.guessed_case == case
        hits[case] = hits.get(case, 0) + int(ok)
        if case in SECURE_CASES:
            secure_total += 1
            secure_hits += int(ok)
    accuracy = {case: hits[case] / counts[case] for case in sorted(counts)}
    if secure_total == 0:
        return LeakStats(accuracy, None, None, None, len(pairs))
    ci = binomtest(secure_hits, secure_total).proportion_ci(
        confidence_level=0.95, method="wilson"
    )
    return LeakStats(
        accuracy_by_case=accuracy,
        secure_accuracy=secure_hits / secure_total,
        ci_low=float(ci.low),
        ci_high=float(ci.high),
        n_rounds=len(pairs),
    )
