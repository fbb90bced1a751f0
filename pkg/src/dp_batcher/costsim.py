"""Parameter sweeps of expected excess gradients, emitted as CSV.

Sweeps are fully deterministic (no sampling): every value is an exact
expectation over the Binomial batch-size law.  The CSV schema

    method,N,q,p,epsilon,T,expected_excess,upper_bound

is the contract plotting tools rely on; fields that do not apply to a method
are left empty (masked rows have no epsilon/T, truncated rows no p).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import binom

METHODS = ("masked", "truncated", "upper_bound")

CSV_HEADER = ("method", "N", "q", "p", "epsilon", "T", "expected_excess", "upper_bound")


@dataclass(frozen=True)
class SweepConfig:
    """Grid for the excess-per-step sweep."""

    dataset_size: int = 50000
    q_grid: tuple[float, ...] = ()
    physical_batches: tuple[int, ...] = (64, 256, 1024)
    epsilons: tuple[float, ...] = (1.0, 8.0)
    delta: float = 1e-5
    tau: float = 1e-5
    epochs: int = 40
    methods: tuple[str, ...] = METHODS

    def __post_init__(self):
        if not self.q_grid:
            raise ValueError("q_grid must be nonempty")
        if any(not 0.0 < q <= 1.0 for q in self.q_grid):
            raise ValueError("q values must lie in (0, 1]")
        if "masked" in self.methods or "upper_bound" in self.methods:
            if not self.physical_batches:
                raise ValueError("physical_batches must be nonempty")
        if "truncated" in self.methods and not self.epsilons:
            raise ValueError("epsilons must be nonempty")
        if any(m not in METHODS for m in self.methods):
            raise ValueError(f"methods must be a subset of {METHODS}")

    def steps_for(self, q: float) -> int:
        """T = epochs / q, rounded to the nearest integer, at least 1."""
        return max(1, round(self.epochs / q))


def default_q_grid(step: float = 0.01, lo: float = 0.01, hi: float = 1.0) -> tuple[float, ...]:
    """Evenly spaced subsampling rates over [lo, hi], rounded to avoid fp drift."""
    if step <= 0:
        raise ValueError("step must be positive")
    if not 0.0 < lo <= hi <= 1.0:
        raise ValueError("need 0 < lo <= hi <= 1")
    out = []
    k = 0
    while (value := round(lo + k * step, 12)) <= hi + 1e-12:
        out.append(min(value, hi))
        k += 1
    return tuple(out)


@dataclass(frozen=True)
class ExcessRow:
    method: str
    dataset_size: int
    q: float
    physical_batch: int | None
    epsilon: float | None
    steps: int | None
    expected_excess: float
    upper_bound: float | None

    def sort_key(self):
        return (
            self.method,
            self.physical_batch if self.physical_batch is not None else -1,
            self.epsilon if self.epsilon is not None else -1.0,
            self.q,
        )


@dataclass(frozen=True)
class ExcessCurve:
    rows: tuple[ExcessRow, ...]
    argmin_physical_batch: int | None = None
    argmin_excess: float | None = None

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def sweep_excess(cfg: SweepConfig) -> ExcessCurve:
    """One row per (method, grid point), sorted by (method, p or epsilon, q)."""
    rows: list[ExcessRow] = []
    n = cfg.dataset_size
    # pmf is shared across all p at a given q, so cache per rate.
    for q in cfg.q_grid:
        expected_batch = q * n
        pmf = None
        if "masked" in cfg.methods:
            pmf = binom.pmf_vector(n, q)
            for p in cfg.physical_batches:
                excess = binom.padding_excess_given_pmf(pmf, p)
                rows.append(
                    ExcessRow(
                        method="masked",
                        dataset_size=n,
                        q=q,
                        physical_batch=p,
                        epsilon=None,
                        steps=None,
                        expected_excess=excess,
                        upper_bound=(binom.excess_upper_bound(p, expected_batch) - 1.0)
                        * expected_batch,
                    )
                )
        if "upper_bound" in cfg.methods:
            for p in cfg.physical_batches:
                bound = (binom.excess_upper_bound(p, expected_batch) - 1.0) * expected_batch
                rows.append(
                    ExcessRow(
                        method="upper_bound",
                        dataset_size=n,
                        q=q,
                        physical_batch=p,
                        epsilon=None,
                        steps=None,
                        expected_excess=bound,
                        upper_bound=bound,
                    )
                )
        if "truncated" in cfg.methods:
            steps = cfg.steps_for(q)
            for eps in cfg.epsilons:
                spec = binom.TruncationSpec(
                    dataset_size=n,
                    expected_batch=expected_batch,
                    steps=steps,
                    epsilon=eps,
                    delta=cfg.delta,
                    tau=cfg.tau,
                )
                result = binom.expected_excess_truncated(spec)
                rows.append(
                    ExcessRow(
                        method="truncated",
                        dataset_size=n,
                        q=q,
                        physical_batch=None,
                        epsilon=eps,
                        steps=steps,
                        expected_excess=result.expected_excess,
                        upper_bound=None,
                    )
                )
    rows.sort(key=ExcessRow.sort_key)
    return ExcessCurve(rows=tuple(rows))


def sweep_physical_batch(n: int, q: float, p_range: tuple[int, int]) -> ExcessCurve:
    """Masked expected excess for every p in the inclusive range, plus the argmin."""
    p_lo, p_hi = p_range
    if p_lo < 1 or p_hi < p_lo:
        raise ValueError("p_range must satisfy 1 <= lo <= hi")
    pmf = binom.pmf_vector(n, q)
    rows = []
    best_p, best_excess = None, math.inf
    for p in range(p_lo, p_hi + 1):
        excess = binom.padding_excess_given_pmf(pmf, p)
        if excess <= best_excess:
            best_p, best_excess = p, excess
        rows.append(
            ExcessRow(
                method="masked",
                dataset_size=n,
                q=q,
                physical_batch=p,
                epsilon=None,
                steps=None,
                expected_excess=excess,
                upper_bound=(binom.excess_upper_bound(p, q * n) - 1.0) * q * n,
            )
        )
    return ExcessCurve(rows=tuple(rows), argmin_physical_batch=best_p, argmin_excess=best_excess)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{value:.6g}"


def emit_csv(curve: ExcessCurve, path: str) -> None:
    """Write the curve (reals at 6 significant digits, empty for N/A fields)."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in curve.rows:
                writer.writerow(
                    [
                        row.method,
                        _format_value(row.dataset_size),
                        _format_value(row.q),
                        _format_value(row.physical_batch),
                        _format_value(row.epsilon),
                        _format_value(row.steps),
                        _format_value(row.expected_excess),
                        _format_value(row.upper_bound),
                    ]
                )
    except OSError as exc:
        raise OSError(f"failed to write excess curve to {path}: {exc}") from exc


def read_csv(path: str) -> ExcessCurve:
    """Parse a file written by `emit_csv`."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for raw in reader:
            if not raw:
                continue
            method, n, q, p, eps, steps, excess, bound = raw
            rows.append(
                ExcessRow(
                    method=method,
                    dataset_size=int(n),
                    q=float(q),
                    physical_batch=int(p) if p else None,
                    epsilon=float(eps) if eps else None,
                    steps=int(steps) if steps else None,
                    expected_excess=float(excess),
                    upper_bound=float(bound) if bound else None,
                )
            )
    return ExcessCurve(rows=tuple(rows))
