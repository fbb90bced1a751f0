"""Per-example-clipped, noise-perturbed SGD over mask-padded batches.

One step: compute a gradient per drawn example, clip each to norm C, multiply
by its mask bit (1 for the real batch, 0 for padding), accumulate across
physical chunks in plan order, add N(0, sigma^2 C^2 I) once, scale by 1/L and
take a plain SGD step.  Accumulation is sequential and in a canonical order,
so the masked path and the plain path over the same active examples produce
bit-identical parameters.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .rng import RngStreams, standard_normal_vector
from .sampling import (
    BatchPlan,
    SamplerConfig,
    build_batch_plan,
    draw_logical_batch_size,
    sample_wor,
    shuffle_batches_reference,
)

TRAIN_MODES = ("masked", "exact-poisson", "shuffle-baseline")


@dataclass(frozen=True)
class ClipSpec:
    """Per-example gradient norm bound C."""

    max_norm: float

    def __post_init__(self):
        if not self.max_norm > 0:
            raise ValueError("max_norm must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise scale sigma, the 1/L gradient scaling, and step count."""

    sigma: float
    expected_batch: float
    steps: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.expected_batch <= 0:
            raise ValueError("expected_batch must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")


@dataclass
class StepReport:
    """Telemetry for one optimizer step (norm stats are pre-clip, active only)."""

    step: int
    true_size: int
    padded_size: int
    norm_min: float | None
    norm_median: float | None
    norm_max: float | None
    fraction_clipped: float
    wall_time_s: float
    samples_processed: int

    def to_dict(self) -> dict:
        return asdict(self)


def clip_gradient(g: np.ndarray, spec: ClipSpec) -> np.ndarray:
    """Rescale g to norm at most C, leaving it untouched when already inside.

    Raises:
        ValueError: if g contains non-finite entries.
    """
    g = np.asarray(g, dtype=float)
    if not np.isfinite(g).all():
        raise ValueError("gradient contains non-finite entries")
    norm = float(np.linalg.norm(g))
    return g * (1.0 / max(1.0, norm / spec.max_norm))


def ghost_norm_dense(
    activation: np.ndarray, output_grad: np.ndarray, include_bias: bool = False
) -> float:
    """Frobenius norm of the dense-layer per-example gradient, without the outer product.

    The weight gradient of a dense layer is the rank-1 matrix (output_grad x
    activation^T), whose squared Frobenius norm factors into (a.a)(e.e); the
    bias gradient contributes another e.e.
    """
    a2 = float(np.dot(activation, activation))
    e2 = float(np.dot(output_grad, output_grad))
    total = a2 * e2 + (e2 if include_bias else 0.0)
    return float(np.sqrt(total))


def per_example_grads(
    model, data: Dataset, theta: np.ndarray, indices, threads: int = 1
) -> list[np.ndarray]:
    """One gradient per example, in input order.

    With threads > 1 the gradients are computed on a thread pool; the output
    order (and therefore any downstream accumulation order) is unchanged.
    """
    features, labels = data.features, data.labels

    def one(i: int) -> np.ndarray:
        return model.per_example_grad(theta, features[i], labels[i])

    idx = [int(i) for i in indices]
    if threads <= 1 or len(idx) < 2:
        return [one(i) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, idx))


def _noise_vector(streams: RngStreams, dim: int, sigma: float, max_norm: float) -> np.ndarray:
    # Always consume the draw so stream positions do not depend on sigma.
    z = standard_normal_vector(streams.noise, dim)
    if sigma == 0.0:
        return np.zeros(dim)
    return (sigma * max_norm) * z


def dp_sgd_step(
    model,
    data: Dataset,
    theta: np.ndarray,
    batch,
    clip: ClipSpec,
    noise: NoiseSpec,
    lr: float,
    streams: RngStreams,
    masked: bool,
    threads: int = 1,
    step_index: int = 0,
) -> tuple[np.ndarray, StepReport]:
    """One update. `batch` is a BatchPlan when masked, else an index sequence.

    Gradients of padding examples are computed and then multiplied by their
    zero mask bit, keeping per-step work a fixed function of the padded size.
    """
    start = time.perf_counter()
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    dim = model.num_params(data.n_features)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dim,):
        raise ValueError(f"theta has shape {theta.shape}, model needs ({dim},)")

    if masked:
        if not isinstance(batch, BatchPlan):
            raise ValueError("masked mode expects a BatchPlan")
        indices = batch.all_indices
        mask = batch.mask.astype(float)
        true_size = batch.true_size
    else:
        indices = np.asarray(list(batch), dtype=np.int64)
        mask = np.ones(indices.shape[0])
        true_size = int(indices.shape[0])

    grads = per_example_grads(model, data, theta, indices, threads=threads)

    theta_acc = np.zeros(dim)
    active_norms: list[float] = []
    clipped_count = 0
    for g, m_bit in zip(grads, mask):
        norm = float(np.linalg.norm(g))
        clipped = clip_gradient(g, clip)
        if m_bit != 0.0:
            active_norms.append(norm)
            if norm > clip.max_norm:
                clipped_count += 1
        theta_acc += m_bit * clipped

    g_tilde = (theta_acc + _noise_vector(streams, dim, noise.sigma, clip.max_norm)) / (
        noise.expected_batch
    )
    theta_new = theta - lr * g_tilde

    if active_norms:
        norm_min = min(active_norms)
        norm_median = float(np.median(active_norms))
        norm_max = max(active_norms)
        fraction = clipped_count / len(active_norms)
    else:
        norm_min = norm_median = norm_max = None
        fraction = 0.0
    report = StepReport(
        step=step_index,
        true_size=true_size,
        padded_size=int(len(grads)),
        norm_min=norm_min,
        norm_median=norm_median,
        norm_max=norm_max,
        fraction_clipped=fraction,
        wall_time_s=time.perf_counter() - start,
        samples_processed=int(len(grads)),
    )
    return theta_new, report


def dataset_metrics(model, data: Dataset, theta: np.ndarray) -> dict:
    """Mean loss over the dataset, plus accuracy for classifiers."""
    losses = [
        model.per_example_loss(theta, data.features[i], data.labels[i])
        for i in range(data.n_examples)
    ]
    out = {"loss": float(np.mean(losses)), "accuracy": None}
    if model.classification:
        predicted = (model.decision_values(theta, data.features) > 0).astype(float)
        out["accuracy"] = float(np.mean(predicted == data.labels))
    return out


def _shuffle_batch_stream(cfg: SamplerConfig, streams: RngStreams):
    """Endless fixed-size batches from fresh per-epoch permutations."""
    batch = max(1, round(cfg.expected_batch))
    while True:
        yield from shuffle_batches_reference(cfg.dataset_size, batch, streams)


def train(
    model,
    data: Dataset,
    cfg: SamplerConfig,
    clip: ClipSpec,
    noise: NoiseSpec,
    lr: float,
    steps: int,
    streams: RngStreams,
    mode: str = "masked",
    theta0: np.ndarray | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, list[StepReport]]:
    """Run `steps` updates and return final parameters plus per-step telemetry.

    Modes:
        masked:          mask-padded batch plans (fixed compute shapes).
        exact-poisson:   the same Poisson batches without padding.
        shuffle-baseline:fixed-size batches from per-epoch shuffles; NOT
                         Poisson subsampling, accounting caveats apply.

    A step whose sampled batch is empty still adds noise and updates, so the
    noise-per-step accounting is independent of batch content.
    """
    if mode not in TRAIN_MODES:
        raise ValueError(f"mode must be one of {TRAIN_MODES}")
    if data.n_examples != cfg.dataset_size:
        raise ValueError("sampler config dataset_size must match the dataset")
    theta = (
        model.init_params(data.n_features, streams.init)
        if theta0 is None
        else np.asarray(theta0, dtype=float).copy()
    )
    shuffle_iter = _shuffle_batch_stream(cfg, streams) if mode == "shuffle-baseline" else None

    reports: list[StepReport] = []
    for t in range(steps):
        if mode == "masked":
            batch: object = build_batch_plan(cfg, streams)
            masked = True
        elif mode == "exact-poisson":
            b = draw_logical_batch_size(cfg, streams)
            batch = sample_wor(cfg.dataset_size, b, streams)
            masked = False
        else:
            batch = next(shuffle_iter)
            masked = False
        theta, report = dp_sgd_step(
            model,
            data,
            theta,
            batch,
            clip,
            noise,
            lr,
            streams,
            masked=masked,
            threads=threads,
            step_index=t,
        )
        reports.append(report)
    return theta, reports
