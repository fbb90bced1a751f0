"""Deterministic, label-separated random streams.

Every stochastic part of the pipeline (batch-size draws, without-replacement
index draws, noise, parameter init) pulls from its own generator, derived from
one master seed.  Draws on one stream never move another stream's state, which
is what makes exact-equality tests between the masked and plain sampling modes
possible.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_SEED_MASK = (1 << 64) - 1

# One generator per label; adding labels is backwards-compatible because each
# stream's seed depends only on (master_seed, label).
STREAM_LABELS = ("batch_size", "wor", "noise", "init")


def _derive_seed(master_seed: int, label: str) -> int:
    """Hash (master_seed, label) into a 128-bit generator seed."""
    key = (master_seed & _SEED_MASK).to_bytes(8, "little")
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16, key=key).digest()
    return int.from_bytes(digest, "little")


class RngStreams:
    """Named independent generators derived from a single 64-bit master seed.

    Attributes:
        master_seed: the normalized (64-bit) master seed.
        batch_size: stream for logical batch-size draws.
        wor: stream for without-replacement index sampling.
        noise: stream for per-step Gaussian noise.
        init: stream for model parameter initialization.

    A single instance must not be shared between threads.  For parallel work,
    derive one instance per task with :meth:`spawn_task`.
    """

    __slots__ = ("master_seed", "batch_size", "wor", "noise", "init")

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed) & _SEED_MASK
        for label in STREAM_LABELS:
            gen = np.random.Generator(np.random.PCG64(_derive_seed(self.master_seed, label)))
            setattr(self, label, gen)

    def spawn_task(self, task_index: int) -> "RngStreams":
        """Independent streams for parallel task `task_index` (same master seed)."""
        if task_index < 0:
            raise ValueError("task_index must be non-negative")
        return RngStreams(_derive_seed(self.master_seed, f"task:{task_index}"))

    def __repr__(self) -> str:
        return f"RngStreams(master_seed={self.master_seed:#x})"


def standard_normal_vector(gen: np.random.Generator, dim: int) -> np.ndarray:
    """Draw `dim` iid standard normals via the Box-Muller transform.

    Uses the trigonometric form on uniforms from `gen`; an odd `dim` discards
    the last half of the final pair.  Kept hand-rolled (rather than
    `gen.standard_normal`) so the draw sequence is pinned to a simple, widely
    portable transform.
    """
    if dim < 0:
        raise ValueError("dim must be non-negative")
    if dim == 0:
        return np.zeros(0)
    half = (dim + 1) // 2
    u1 = gen.random(half)
    u2 = gen.random(half)
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], log never hits 0
    angle = (2.0 * math.pi) * u2
    pairs = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return pairs[:dim]
