"""Band-limited thermal noise sources and mean-square estimation.

A resistor R held at effective temperature T over bandwidth B contributes a
zero-mean Gaussian voltage of variance 4 k T R B (Johnson-Nyquist).  The
simulator samples this noise at the Nyquist rate of the shared bandwidth, so
consecutive samples are independent draws and a bit period of duration
gamma / B contains 2 * gamma samples.

Everything random flows from a single 64-bit seed.  Substreams are derived by
hashing the seed together with string or integer labels (`derive_seed`), which
makes every stream a pure function of (seed, labels): the same experiment spec
always produces bit-identical sample sequences, independent of evaluation
order, and batches can run concurrently without sharing generator state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError

MAX_SEED = 2**64 - 1


def derive_seed(seed: int, *labels) -> int:
    """Derive an independent 64-bit substream seed from (seed, labels).

    Parameters
    ----------
    seed : int
        Top-level seed, 0 <= seed < 2**64.
    *labels
        Hashable stream labels (strings, ints, or tuples of those).

    Returns
    -------
    int
        A 64-bit integer suitable for seeding `numpy.random.default_rng`.

    Notes
    -----
    The derivation is SHA-256 over the repr of the label tuple, truncated to
    64 bits.  Hashing rather than sequential spawning keeps the mapping
    independent of how many other streams were drawn first.
    """
    if not 0 <= int(seed) <= MAX_SEED:
        raise ConfigError(f"seed must fit in 64 bits, got {seed!r}")
    text = repr((int(seed),) + labels).encode("utf-8")
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big")


@dataclass(frozen=True)
class NoiseSpec:
    """One Gaussian noise draw, fully determined by its three fields.

    variance is the per-sample variance in normalized units, n_samples the
    draw length, seed the (derived) 64-bit stream seed.
    """

    variance: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ConfigError(f"noise variance must be > 0, got {self.variance!r}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed!r}")


def gen_noise(spec: NoiseSpec) -> np.ndarray:
    """Draw `spec.n_samples` zero-mean Gaussian samples of `spec.variance`.

    Deterministic in `spec`: identical specs yield bit-identical arrays.
    """
    rng = np.random.default_rng(spec.seed)
    return np.sqrt(spec.variance) * rng.standard_normal(int(spec.n_samples))


@dataclass(frozen=True)
class MsEstimate:
    """A mean-square estimate together with the sample count behind it.

    For n independent Gaussian samples of true variance s2 the estimate is
    distributed as (s2 / n) * chi2(n): mean s2, relative standard deviation
    sqrt(2 / n).  Merging is the sample-count-weighted average, so merged
    estimates are exactly what a single pass over the concatenated samples
    would give (up to float associativity).
    """

    mean_square: float
    n: int

    def merge(self, other: "MsEstimate") -> "MsEstimate":
        n = self.n + other.n
        ms = (self.mean_square * self.n + other.mean_square * other.n) / n
        return MsEstimate(ms, n)


def mean_square(samples) -> MsEstimate:
    """Mean of the squared samples as an MsEstimate.

    Raises UsageError on an empty input; a mean square of nothing is not 0.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise UsageError("mean_square of an empty sample array")
    return MsEstimate(float(np.mean(arr * arr)), int(arr.size))
