"""DP-SGD with exact Poisson subsampling over fixed-size physical batches.

The sampler draws the logical batch size from the exact Binomial law, pads the
index draw up to a multiple of the physical batch size, and masks the padding
out of the gradient sum, so per-step compute shapes are constant while the
effective batch keeps the Poisson-subsampling law that DP accountants assume.
The `binom` module quantifies what the padding costs in expectation and
compares it with the truncated-Binomial alternative.
"""

from .binom import (
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
from .costsim import ExcessCurve, ExcessRow, SweepConfig, emit_csv, read_csv, sweep_excess, sweep_physical_batch
from .data import Dataset, load_csv, save_csv, synthetic_classification, synthetic_regression
from .engine import (
    ClipSpec,
    NoiseSpec,
    StepReport,
    clip_gradient,
    dataset_metrics,
    dp_sgd_step,
    ghost_norm_dense,
    per_example_grads,
    train,
)
from .models import LinearRegression, LogisticRegression, TwoLayerClassifier, build_model
from .rng import RngStreams, standard_normal_vector
from .sampling import (
    BatchPlan,
    SamplerConfig,
    build_batch_plan,
    draw_logical_batch_size,
    poisson_subsample_reference,
    round_up_to_physical,
    sample_wor,
    shuffle_batches_reference,
    verify_active_set_law,
)

__version__ = "0.1.0"
