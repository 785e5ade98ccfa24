"""Differentially private univariate mean estimation with explicit bias
accounting: mechanisms, closed-form tradeoff bounds, and a reproducible
Monte Carlo benchmark harness."""

from .noise import NoiseStream
from .mechanisms import (
    PrivacyBudget,
    MomentModel,
    EstimateOutcome,
    clip,
    clipped_mean,
    clip_bias_bound,
    clipped_mean_laplace,
    threshold_clipped_mean,
    name_and_shame_mean,
    combined_unbiased_mean,
    block_average_estimator,
)
from .symmetric import (
    CoarseParams,
    FineParams,
    round_half_open,
    coarse_estimate,
    kv_coarse_estimate,
    default_fine_params,
    fine_estimate,
    gaussian_defaults,
)
from .unknown_n import (
    SizeEstimate,
    SmoothSensParams,
    private_size,
    size_oblivious_wrap,
    mean_local_sensitivity,
    mean_smooth_sensitivity,
    smooth_sens_mean,
)
from . import bounds, bench

__version__ = "0.1.0"
