"""Poisson subsampling via its Binomial + without-replacement decomposition.

A logical batch is drawn in two steps: the batch size b ~ Binom(N, q), then b
distinct indices uniformly at random.  That two-step draw has exactly the law
of including every example independently with probability q, so DP accounting
for Poisson subsampling applies unchanged.  To keep compute shapes fixed, the
index draw is padded up to the next multiple of the physical batch size and a
0/1 mask marks which positions are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .rng import RngStreams


@dataclass(frozen=True)
class SamplerConfig:
    """Subsampling parameters: dataset size N, expected batch L, chunk size p."""

    dataset_size: int
    expected_batch: float
    physical_batch: int

    def __post_init__(self):
        if self.dataset_size < 1:
            raise ValueError("dataset_size must be a positive integer")
        if not 0 < self.expected_batch <= self.dataset_size:
            raise ValueError("expected_batch must satisfy 0 < L <= N")
        if not 1 <= self.physical_batch <= self.dataset_size:
            raise ValueError("physical_batch must satisfy 1 <= p <= N")

    @property
    def rate(self) -> float:
        """Subsampling rate q = L/N."""
        return self.expected_batch / self.dataset_size


@dataclass(frozen=True, eq=False)
class BatchPlan:
    """One step's sampled batch, padded to fixed-size physical chunks.

    `physical_batches` holds k index arrays of length exactly p whose
    concatenation carries the mask: the first `true_size` positions are the
    real Poisson-sampled batch (always distinct), the remaining
    `padded_size - true_size` positions are padding whose gradients get
    multiplied by 0.  In the rare event that the padded size exceeds the
    dataset (the sampled size falls in the last partial block of N), padding
    positions repeat already-drawn indices; they are masked out either way.
    """

    true_size: int
    padded_size: int
    physical_batches: tuple[np.ndarray, ...]
    mask: np.ndarray

    @property
    def num_physical_batches(self) -> int:
        return len(self.physical_batches)

    @property
    def all_indices(self) -> np.ndarray:
        """All drawn indices (real + padding) in plan order."""
        if not self.physical_batches:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.physical_batches)

    @property
    def active_indices(self) -> np.ndarray:
        """The real (mask = 1) batch, i.e. the exact Poisson sample."""
        return self.all_indices[: self.true_size]


def draw_logical_batch_size(cfg: SamplerConfig, streams: RngStreams) -> int:
    """Draw b ~ Binom(N, L/N) from the batch-size stream.

    numpy's generator uses exact inversion for small N*q and the BTPE
    accept-reject method otherwise; both sample the exact Binomial law,
    which the subset-distribution tests rely on.
    """
    return int(streams.batch_size.binomial(cfg.dataset_size, cfg.rate))


def round_up_to_physical(b: int, p: int) -> int:
    """Smallest multiple of p that is >= b (0 stays 0)."""
    if p < 1:
        raise ValueError("physical batch size must be >= 1")
    if b < 0:
        raise ValueError("batch size must be non-negative")
    return p * ((b + p - 1) // p)


def sample_wor(n_total: int, m: int, streams: RngStreams) -> np.ndarray:
    """Draw m distinct indices from [0, n_total), uniformly and in uniform order.

    Implemented as a full Fisher-Yates shuffle (one `permutation` draw from the
    wor stream) truncated to its first m entries, which has exactly the partial
    Fisher-Yates law.  Consuming one permutation regardless of m keeps the wor
    stream state independent of the requested size, so runs that draw different
    m from the same seed stay aligned step for step.
    """
    if m < 0 or m > n_total:
        raise ValueError(f"cannot draw {m} distinct indices from {n_total}")
    perm = streams.wor.permutation(n_total)
    return perm[:m].astype(np.int64, copy=False)


def build_batch_plan(cfg: SamplerConfig, streams: RngStreams) -> BatchPlan:
    """Sample one step's batch plan: size draw, padded index draw, mask."""
    b = draw_logical_batch_size(cfg, streams)
    n, p = cfg.dataset_size, cfg.physical_batch
    b_plus = round_up_to_physical(b, p)
    idx = sample_wor(n, min(b_plus, n), streams)
    if b_plus > n:
        # not enough distinct examples to pad with; reuse drawn ones, they
        # are masked out of the gradient sum anyway
        idx = np.concatenate([idx, idx[: b_plus - n]])
    chunks = tuple(idx[start : start + p] for start in range(0, b_plus, p))
    mask = np.zeros(b_plus, dtype=np.uint8)
    mask[:b] = 1
    return BatchPlan(true_size=b, padded_size=b_plus, physical_batches=chunks, mask=mask)


def poisson_subsample_reference(n_total: int, q: float, streams: RngStreams) -> np.ndarray:
    """Reference sampler: include each index independently with probability q.

    This is the textbook definition and serves as the distributional oracle
    that the decomposed sampler is tested against.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if q == 0.0:
        return np.zeros(0, dtype=np.int64)
    if q == 1.0:
        return np.arange(n_total, dtype=np.int64)
    keep = streams.wor.random(n_total) < q
    return np.flatnonzero(keep).astype(np.int64)


def shuffle_batches_reference(
    n_total: int, batch: int, streams: RngStreams
) -> list[np.ndarray]:
    """Permute [0, n_total) and split into fixed-size batches (last may be short).

    Provided only as a labeled baseline: batches formed this way are NOT
    Poisson subsampled and standard DP accounting does not apply to them.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    perm = streams.wor.permutation(n_total).astype(np.int64, copy=False)
    return [perm[start : start + batch] for start in range(0, n_total, batch)]


# -- subset-distribution verification ---------------------------------------
#
# For small n the full joint law of the sampled subset can be checked: there
# are 2^n subsets and the target probability of subset S is q^|S| (1-q)^(n-|S|).

MAX_VERIFY_INDICES = 12


@dataclass(frozen=True)
class SubsetTestResult:
    statistic: float
    p_value: float
    dof: int
    draws: int
    min_expected: float

    def passed(self, alpha: float) -> bool:
        return self.p_value >= alpha


def bernoulli_subset_probs(n: int, q: float) -> np.ndarray:
    """Probability of each of the 2^n subsets under independent inclusion."""
    sizes = np.array([bin(s).count("1") for s in range(1 << n)])
    return q**sizes * (1.0 - q) ** (n - sizes)


def active_set_counts(cfg: SamplerConfig, streams: RngStreams, draws: int) -> np.ndarray:
    """Histogram (bitmask-keyed) of the masked sampler's active sets."""
    n = cfg.dataset_size
    if n > MAX_VERIFY_INDICES:
        raise ValueError(f"subset enumeration limited to n <= {MAX_VERIFY_INDICES}")
    counts = np.zeros(1 << n, dtype=np.int64)
    for _ in range(draws):
        plan = build_batch_plan(cfg, streams)
        key = 0
        for i in plan.active_indices:
            key |= 1 << int(i)
        counts[key] += 1
    return counts


def subset_chi_square(counts: np.ndarray, n: int, q: float) -> SubsetTestResult:
    """Chi-square GOF of observed subset counts against the independent law."""
    draws = int(counts.sum())
    expected = bernoulli_subset_probs(n, q) * draws
    statistic = float((np.square(counts - expected) / expected).sum())
    dof = (1 << n) - 1
    p_value = float(stats.chi2.sf(statistic, dof))
    return SubsetTestResult(
        statistic=statistic,
        p_value=p_value,
        dof=dof,
        draws=draws,
        min_expected=float(expected.min()),
    )


def verify_active_set_law(
    cfg: SamplerConfig, streams: RngStreams, draws: int
) -> SubsetTestResult:
    """Draw plans and chi-square their active sets against the exact Poisson law."""
    counts = active_set_counts(cfg, streams, draws)
    return subset_chi_square(counts, cfg.dataset_size, cfg.rate)
