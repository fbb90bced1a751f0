import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dp_batcher.binom import (
    ExcessResult,
    TruncationSpec,
    binom_survival,
    excess_upper_bound,
    expected_excess_masked,
    expected_excess_truncated,
    log_binom_pmf,
    optimal_physical_batch,
    pmf_vector,
    truncation_bound,
)
from oracles import (
    exact_half_padding_excess,
    exact_half_truncated_mean,
    mp_log_pmf,
    mp_survival_suffix,
)


# --- log pmf -----------------------------------------------------------------

def test_log_pmf_small_cases():
    assert log_binom_pmf(1, 0.5, 0) == pytest.approx(math.log(0.5), rel=1e-14)
    assert log_binom_pmf(1, 0.5, 1) == pytest.approx(math.log(0.5), rel=1e-14)
    assert log_binom_pmf(2, 0.5, 1) == pytest.approx(math.log(0.5), rel=1e-14)
    assert log_binom_pmf(10, 0.5, 0) == pytest.approx(10 * math.log(0.5), rel=1e-15)


def test_log_pmf_rejects_bad_arguments():
    with pytest.raises(ValueError):
        log_binom_pmf(10, 0.5, 11)
    with pytest.raises(ValueError):
        log_binom_pmf(10, 0.5, -1)
    with pytest.raises(ValueError):
        log_binom_pmf(10, 0.0, 3)
    with pytest.raises(ValueError):
        log_binom_pmf(10, 1.0, 3)


def test_log_pmf_matches_exact_rational():
    # exact rational pmf at q = 1/2, log taken in 60-digit arithmetic
    value = log_binom_pmf(50000, 0.5, 25000)
    exact = mp_log_pmf(50000, Fraction(1, 2), 25000)
    rel = abs((mp.mpf(value) - exact) / exact)
    assert rel < 1e-10  # >= 10 significant digits


@pytest.mark.parametrize("n, q", [(1, 0.5), (100, 0.3), (5000, 0.77), (100000, 0.5)])
def test_pmf_unit_mass(n, q):
    total = math.fsum(pmf_vector(n, q).tolist())
    assert abs(total - 1.0) <= 1e-12


def test_pmf_vector_matches_scalar_op():
    pmf = pmf_vector(500, 0.31)
    for i in (0, 1, 155, 250, 499, 500):
        assert pmf[i] == pytest.approx(math.exp(log_binom_pmf(500, 0.31, i)), rel=1e-15)


def test_pmf_vector_degenerate_rates():
    z = pmf_vector(10, 0.0)
    assert z[0] == 1.0 and z[1:].sum() == 0.0
    o = pmf_vector(10, 1.0)
    assert o[10] == 1.0 and o[:10].sum() == 0.0


@given(
    n=st.integers(1, 400),
    q=st.floats(1e-6, 1 - 1e-6),
    i=st.integers(0, 400),
)
@settings(max_examples=80)
def test_pmf_symmetry(n, q, i):
    i = min(i, n)
    a = log_binom_pmf(n, q, i)
    b = log_binom_pmf(n, 1.0 - q, n - i)
    assert a == pytest.approx(b, rel=1e-11, abs=1e-11)


# --- survival ------------------------------------------------------------------

def test_survival_edges():
    assert binom_survival(10, 0.5, 10) == 0.0
    assert binom_survival(10, 0.5, 12) == 0.0
    assert binom_survival(10, 0.5, -1) == 1.0
    assert binom_survival(10, 0.5, 0) == pytest.approx(1.0 - 0.5**10, rel=1e-15)
    assert binom_survival(10, 0.0, 0) == 0.0
    assert binom_survival(10, 1.0, 9) == 1.0
    assert binom_survival(10, 1.0, 10) == 0.0


def test_survival_matches_high_precision_oracle():
    n, q = 50000, 0.5
    suffix = mp_survival_suffix(n, q)
    for b in (24000, 24600, 24990, 25000, 25010, 25400, 25900, 26100):
        ours = binom_survival(n, q, b)
        exact = suffix[b]
        assert float(abs(mp.mpf(ours) - exact) / exact) < 1e-12


def test_survival_monotone_and_consistent_with_pmf():
    n, q = 3000, 0.42
    pmf = pmf_vector(n, q)
    last = 1.0
    for b in range(0, n + 1, 37):
        s = binom_survival(n, q, b)
        assert s <= last + 1e-15
        last = s
        direct = math.fsum(pmf[b + 1 :].tolist())
        assert abs(s - direct) <= 1e-12


# --- truncation bound -------------------------------------------------------------

def test_truncation_bound_zero_when_threshold_loose():
    # tiny rate makes survival(0) = 1-(1-q)^N small enough to pass at B = 0
    spec = TruncationSpec(
        dataset_size=100, expected_batch=1e-3, steps=1, epsilon=0.01, delta=0.9, tau=0.9
    )
    assert binom_survival(100, spec.rate, 0) <= spec.tail_threshold
    assert truncation_bound(spec) == 0


def test_truncation_bound_monotone_in_tau():
    base = dict(dataset_size=5000, expected_batch=2500.0, steps=40, epsilon=2.0, delta=1e-5)
    bounds = [
        truncation_bound(TruncationSpec(tau=tau, **base)) for tau in (1e-7, 1e-5, 1e-3, 1e-1)
    ]
    assert bounds == sorted(bounds, reverse=True)


def test_truncation_bound_matches_exhaustive_scan():
    spec = TruncationSpec(
        dataset_size=50000, expected_batch=25000.0, steps=80, epsilon=8.0, delta=1e-5, tau=1e-5
    )
    ours = truncation_bound(spec)
    suffix = mp_survival_suffix(spec.dataset_size, spec.rate)
    with mp.workdps(50):
        thr = mp.mpf(spec.tau) * mp.mpf(spec.delta) / (spec.steps * (1 + mp.e**spec.epsilon))
        scan = next(b for b in range(spec.dataset_size + 1) if suffix[b] <= thr)
    assert ours == scan
    assert suffix[ours] <= thr < suffix[ours - 1]


def test_spec_validation():
    with pytest.raises(ValueError):
        TruncationSpec(dataset_size=10, expected_batch=5.0, steps=0, epsilon=1.0, delta=1e-5, tau=1e-5)
    with pytest.raises(ValueError):
        TruncationSpec(dataset_size=10, expected_batch=5.0, steps=1, epsilon=1.0, delta=2.0, tau=1e-5)
    with pytest.raises(ValueError):
        TruncationSpec(dataset_size=10, expected_batch=50.0, steps=1, epsilon=1.0, delta=1e-5, tau=1e-5)


# --- expected excess: masked ---------------------------------------------------------

@pytest.mark.parametrize("n, q", [(100, 0.3), (5000, 0.9), (50000, 0.5)])
def test_masked_excess_zero_at_unit_physical_batch(n, q):
    assert expected_excess_masked(n, q, 1).expected_excess == 0.0


def test_masked_excess_small_exact_oracle():
    got = expected_excess_masked(30, 0.5, 7).expected_excess
    want = float(exact_half_padding_excess(30, 7))
    assert got == pytest.approx(want, abs=1e-12)


def test_masked_excess_degenerate_rates():
    assert expected_excess_masked(100, 1.0, 8).expected_excess == 104 - 100
    assert expected_excess_masked(100, 0.0, 8).expected_excess == 0.0


@given(
    n=st.integers(1, 400),
    q=st.floats(0.0, 1.0),
    p=st.integers(1, 64),
)
@settings(max_examples=60)
def test_masked_excess_bounds(n, q, p):
    result = expected_excess_masked(n, q, p)
    assert 0.0 <= result.expected_excess <= p - 1
    # relative form never exceeds the closed-form bound
    if q > 0:
        expected_batch = n * q
        ratio = (expected_batch + result.expected_excess) / expected_batch
        assert ratio <= excess_upper_bound(p, expected_batch) + 1e-12


def test_masked_excess_montecarlo_cross_check():
    # empirical mean of (b_plus - b) over 1e6 batch-size draws, 3 MC sigmas
    n, q, p = 2000, 0.37, 48
    exact = expected_excess_masked(n, q, p).expected_excess
    from dp_batcher.rng import RngStreams
    from dp_batcher.sampling import SamplerConfig, build_batch_plan

    sizes = RngStreams(8675309).batch_size.binomial(n, q, size=10**6)
    padding = (-sizes) % p
    se = padding.std(ddof=1) / math.sqrt(padding.shape[0])
    assert abs(padding.mean() - exact) < 3.0 * se

    # and the full plan pipeline reports the same padding per draw
    cfg = SamplerConfig(dataset_size=n, expected_batch=n * q, physical_batch=p)
    streams = RngStreams(8675309)
    plans = [build_batch_plan(cfg, streams) for _ in range(2000)]
    assert all(pl.padded_size - pl.true_size == (-pl.true_size) % p for pl in plans)
    mean_plan_padding = np.mean([pl.padded_size - pl.true_size for pl in plans])
    se_plan = np.std([pl.padded_size - pl.true_size for pl in plans], ddof=1) / math.sqrt(2000)
    assert abs(mean_plan_padding - exact) < 4.0 * se_plan


# --- expected excess: truncated --------------------------------------------------------

def test_truncated_excess_degenerate_cap_at_n():
    # threshold below q^N forces the cap to N; untruncated mean is N q exactly
    spec = TruncationSpec(
        dataset_size=20, expected_batch=10.0, steps=10, epsilon=8.0, delta=1e-3, tau=1e-3
    )
    assert truncation_bound(spec) == 20
    result = expected_excess_truncated(spec)
    assert result.expected_excess == pytest.approx(20 - 10.0, rel=1e-12)


def test_truncated_excess_matches_direct_summation():
    spec = TruncationSpec(
        dataset_size=50000, expected_batch=25000.0, steps=80, epsilon=8.0, delta=1e-5, tau=1e-5
    )
    result = expected_excess_truncated(spec)
    cap = truncation_bound(spec)
    want = cap - exact_half_truncated_mean(50000, cap)
    assert result.expected_excess == pytest.approx(float(want), rel=1e-6)


def test_truncated_excess_nonnegative_and_two_sided():
    spec = TruncationSpec(
        dataset_size=5000, expected_batch=1500.0, steps=40, epsilon=1.0, delta=1e-5, tau=1e-5
    )
    one_sided = expected_excess_truncated(spec)
    two_sided = expected_excess_truncated(spec, two_sided=True)
    assert one_sided.expected_excess >= 0.0
    assert two_sided.expected_excess >= 0.0
    # dropping the lower tail can only raise the truncated mean
    assert two_sided.expected_excess <= one_sided.expected_excess + 1e-12


# --- closed-form bound and optimal p ------------------------------------------------

def test_upper_bound_values():
    assert excess_upper_bound(1, 123.0) == 1.0
    assert excess_upper_bound(64, 25000.0) == pytest.approx(1.00252, abs=1e-12)
    assert excess_upper_bound(1024, 25000.0) == pytest.approx(1.04092, abs=1e-12)
    with pytest.raises(ValueError):
        excess_upper_bound(0, 10.0)
    with pytest.raises(ValueError):
        excess_upper_bound(8, 0.0)


def test_optimal_physical_batch_trivial():
    assert optimal_physical_batch(1000, 0.4, 1) == (1, 0.0)


def test_optimal_physical_batch_definitional():
    p_star, excess = optimal_physical_batch(500, 0.3, 32)
    assert excess == expected_excess_masked(500, 0.3, p_star).expected_excess
    # padding excess is uniquely zero at p = 1 for non-degenerate rates
    assert p_star == 1 and excess == 0.0


def test_optimal_physical_batch_tie_break_prefers_larger():
    # at q = 1 the batch size is always N, so every divisor of N has excess 0;
    # ties must resolve to the largest usable p
    p_star, excess = optimal_physical_batch(100, 1.0, 40)
    assert (p_star, excess) == (25, 0.0)
    p_star, excess = optimal_physical_batch(100, 1.0, 3)
    assert (p_star, excess) == (2, 0.0)


def test_excess_result_validation():
    with pytest.raises(ValueError):
        ExcessResult("bogus", 1.0, dataset_size=10, rate=0.5)
    with pytest.raises(ValueError):
        ExcessResult("masked", -1.0, dataset_size=10, rate=0.5)
