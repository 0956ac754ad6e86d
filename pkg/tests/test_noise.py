import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kljnsim.errors import ConfigError, UsageError
from kljnsim.noise import MAX_SEED, MsEstimate, NoiseSpec, derive_seed, gen_noise, mean_square


def test_derive_seed_is_deterministic_and_label_sensitive():
    a = derive_seed(42, "stream", 1)
    assert a == derive_seed(42, "stream", 1)
    assert a != derive_seed(42, "stream", 2)
    assert a != derive_seed(43, "stream", 1)
    assert 0 <= a <= MAX_SEED


def test_derive_seed_rejects_oversized_seed():
    with pytest.raises(ConfigError):
        derive_seed(2**64)
    with pytest.raises(ConfigError):
        derive_seed(-1)


def test_noise_spec_rejects_degenerate_variance():
    with pytest.raises(ConfigError):
        NoiseSpec(0.0, 10, 1)
    with pytest.raises(ConfigError):
        NoiseSpec(-1.0, 10, 1)


def test_noise_spec_rejects_bad_counts_and_seeds():
    with pytest.raises(ConfigError):
        NoiseSpec(1.0, 0, 1)
    with pytest.raises(ConfigError):
        NoiseSpec(1.0, 2.5, 1)
    with pytest.raises(ConfigError):
        NoiseSpec(1.0, 10, 2**64)


def test_gen_noise_repeatable_bit_for_bit():
    spec = NoiseSpec(2.0, 4096, derive_seed(9, "rep"))
    x = gen_noise(spec)
    y = gen_noise(spec)
    assert x.shape == (4096,)
    assert np.array_equal(x, y)


def test_gen_noise_mean_square_concentrates():
    x = gen_noise(NoiseSpec(1.0, 10**6, derive_seed(1, "ms")))
    est = mean_square(x)
    assert est.n == 10**6
    assert 0.99 <= est.mean_square <= 1.01
    assert abs(float(np.mean(x))) <= 0.004  # 4 / sqrt(n)


@pytest.mark.parametrize("n,reps,band", [(100, 300, 0.2), (10**4, 300, 0.2), (10**6, 80, 0.3)])
def test_mean_square_relative_spread_scales_as_sqrt_2_over_n(n, reps, band):
    est = [
        mean_square(gen_noise(NoiseSpec(1.0, n, derive_seed(2, "c", n, j)))).mean_square
        for j in range(reps)
    ]
    ratio = float(np.std(est)) / (2.0 / n) ** 0.5
    assert abs(ratio - 1.0) <= band


def test_mean_square_hand_values():
    est = mean_square([3, -4])
    assert est.mean_square == pytest.approx(12.5)
    assert est.n == 2
    assert mean_square(np.zeros(7)).mean_square == 0.0


def test_mean_square_rejects_empty_input():
    with pytest.raises(UsageError):
        mean_square([])


def test_ms_estimate_merge_matches_single_pass():
    x = gen_noise(NoiseSpec(1.0, 1000, derive_seed(3, "a")))
    y = gen_noise(NoiseSpec(1.0, 500, derive_seed(3, "b")))
    merged = mean_square(x).merge(mean_square(y))
    joint = mean_square(np.concatenate([x, y]))
    assert merged.n == joint.n == 1500
    assert merged.mean_square == pytest.approx(joint.mean_square, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.01, 100.0), st.integers(1, 50)), min_size=2, max_size=6)
)
def test_ms_estimate_merge_is_count_weighted(parts):
    ests = [MsEstimate(ms, n) for ms, n in parts]
    acc = ests[0]
    for e in ests[1:]:
        acc = acc.merge(e)
    total_n = sum(n for _, n in parts)
    expect = sum(ms * n for ms, n in parts) / total_n
    assert acc.n == total_n
    assert acc.mean_square == pytest.approx(expect, rel=1e-9)
