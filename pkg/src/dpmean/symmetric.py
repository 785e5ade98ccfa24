"""Unbiased private mean estimation for symmetric distributions.

A two-stage estimator: a coarse stage locates the mean up to a constant
using a private histogram whose bins carry a uniformly random offset, and
a fine stage clips the remaining samples around the coarse estimate and
adds Laplace noise.  The random bin offset is the whole point: it makes
the coarse estimate's distribution symmetric about the true center, so
the clipping in the fine stage introduces no bias.  Dropping the offset
(bins anchored at the integers) recovers the classic baseline, whose bias
cycles with the fractional part of the true mean; it is kept here for
comparison.

The two stages consume disjoint stream splits and disjoint data halves,
so the coarse estimate is independent of everything the fine stage
touches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mechanisms import EstimateOutcome, PrivacyBudget
from .noise import NoiseStream

__all__ = [
    "CoarseParams",
    "FineParams",
    "round_half_open",
    "coarse_estimate",
    "kv_coarse_estimate",
    "default_fine_params",
    "fine_estimate",
    "gaussian_defaults",
    "InsufficientSampleError",
]

logger = logging.getLogger(__name__)


class InsufficientSampleError(ValueError):
    """The dataset is too small for the requested parameter derivation."""


@dataclass(frozen=True)
class CoarseParams:
    """Privacy parameters of the coarse histogram stage."""

    eps: float
    delta: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def threshold(self) -> float:
        """Noisy-count threshold 2 + 2 ln(1/delta) / eps below which the
        coarse stage reports failure."""
        return 2.0 + 2.0 * math.log(1.0 / self.delta) / self.eps


@dataclass(frozen=True)
class FineParams:
    """Full parameter set of the two-stage estimator.

    ``n1`` samples feed the coarse stage (after division by ``sigma``),
    the remaining ``n2`` are clipped to ``c`` around the rescaled coarse
    estimate and averaged.
    """

    eps: float
    delta: float
    c: float
    sigma: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.c <= 0 or self.sigma <= 0:
            raise ValueError("clipping radius and coarse scale must be positive")
        if self.n1 < 1 or self.n2 < 0:
            raise ValueError(f"need n1 >= 1 and n2 >= 0, got n1={self.n1}, n2={self.n2}")


def round_half_open(x: float) -> int:
    """The unique integer k with x in [k - 1/2, k + 1/2)."""
    if not math.isfinite(x):
        raise ValueError(f"cannot round non-finite value {x}")
    k = math.floor(x + 0.5)
    # x + 0.5 can round across the boundary (e.g. the double just below
    # 0.5); re-anchor with exact comparisons against the half points,
    # which are representable exactly for any bin index in range.
    if x < k - 0.5:
        k -= 1
    elif x >= k + 0.5:
        k += 1
    return k


def _round_half_open_vec(x: np.ndarray) -> np.ndarray:
    k = np.floor(x + 0.5)
    k = np.where(x < k - 0.5, k - 1.0, k)
    k = np.where(x >= k + 0.5, k + 1.0, k)
    return k.astype(np.int64)


def _coarse_with_offset(
    x: np.ndarray,
    params: CoarseParams,
    offset: float,
    stream: NoiseStream,
) -> EstimateOutcome:
    budget = PrivacyBudget(params.eps, params.delta)
    if x.size == 0:
        return EstimateOutcome(None, budget)
    bins, counts = np.unique(_round_half_open_vec(x - offset), return_counts=True)
    # One Laplace(2/eps) draw per occupied bin, consumed in ascending
    # bin-index order (np.unique sorts).  Pinning the draw order makes the
    # translation/reflection couplings exact and testable.
    noisy = counts + np.array([stream.laplace(2.0 / params.eps) for _ in bins])
    best = int(np.argmax(noisy))  # ties break toward the smallest bin index
    if noisy[best] <= params.threshold:
        return EstimateOutcome(None, budget)
    return EstimateOutcome(offset + float(bins[best]), budget)


def coarse_estimate(data, params: CoarseParams, stream: NoiseStream) -> EstimateOutcome:
    """Private histogram with a random bin offset.

    Draws an offset T uniform on [-1/2, 1/2), counts points per unit bin
    k = round(x_i - T), perturbs each occupied count with Laplace(2/eps),
    and returns T plus the argmax bin if its noisy count clears the
    threshold, or the failure sentinel otherwise.  Offsetting the bins
    makes the output distribution equivariant under translation and
    reflection of the data.
    """
    x = np.asarray(data, dtype=float)
    return _coarse_with_offset(x, params, stream.uniform_offset(), stream)


def kv_coarse_estimate(data, params: CoarseParams, stream: NoiseStream) -> EstimateOutcome:
    """Coarse histogram with the offset pinned to 0 (bins anchored at the
    integers).  Kept as the baseline whose downstream bias cycles with
    the fractional part of the true mean."""
    x = np.asarray(data, dtype=float)
    return _coarse_with_offset(x, params, 0.0, stream)


def _coarse_sample_floor(eps: float, delta: float, gamma: float) -> int:
    """Smallest n1 satisfying
    n1 >= max{7 + 7 ln(1/delta)/eps, 128 ln(2/gamma), (16/eps) ln(n1/gamma)}.

    The last term is self-referential; a ceiling fixed-point iteration
    from n1 = 16 settles it (the iteration is monotone up to the ceiling,
    so a 100-step cap is far more than enough).
    """
    static = max(7.0 + 7.0 * math.log(1.0 / delta) / eps, 128.0 * math.log(2.0 / gamma))
    n1, prev = 16, -1
    for _ in range(100):
        nxt = math.ceil(max(static, (16.0 / eps) * math.log(n1 / gamma)))
        if nxt == n1:
            return n1
        prev, n1 = n1, nxt
    # A ceiling 2-cycle can only alternate between a value and one that
    # dominates it; the larger of the pair satisfies the bound.
    return max(n1, prev)


def default_fine_params(n: int, eps: float, delta: float, psi: float, lam: float) -> FineParams:
    """Parameter derivation for the two-stage estimator.

    Sets the coarse failure target gamma = delta^2 and the coarse scale
    sigma = 10, solves the implicit sample floor for n1, and widens the
    fine clipping radius to c = sigma + psi (n2 eps)^(1/lam).
    """
    if n < 2:
        raise InsufficientSampleError(f"need at least 2 samples, got {n}")
    if psi <= 0 or lam < 2:
        raise ValueError(f"need psi > 0 and lam >= 2, got psi={psi}, lam={lam}")
    gamma = delta**2
    sigma = 10.0
    n1 = _coarse_sample_floor(eps, delta, gamma)
    if n1 >= n:
        raise InsufficientSampleError(
            f"coarse stage alone needs {n1} samples at eps={eps}, delta={delta}; got n={n}"
        )
    n2 = n - n1
    c = sigma + psi * (n2 * eps) ** (1.0 / lam)
    return FineParams(eps, delta, c, sigma, n1, n2)


def gaussian_moment_order(n: int) -> int:
    """Moment order used for (sub-)Gaussian data: max(2, ceil(ln n)).

    Growing the order logarithmically with n is what turns the clipping
    cost into the log factor of the Gaussian error rate; 2 is the floor
    below which the derivation is undefined.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return max(2, math.ceil(math.log(n)))


def gaussian_defaults(n: int, eps: float, delta: float) -> FineParams:
    """Defaults for (sub-)Gaussian data: moment order lam = max(2, ceil(ln n))
    with central-moment bound psi = sqrt(lam) (a standard normal's lam-th
    absolute central moment is at most lam^(lam/2)), then the standard
    derivation."""
    lam = gaussian_moment_order(n)
    return default_fine_params(n, eps, delta, math.sqrt(lam), lam)


CoarseFn = Callable[[np.ndarray, CoarseParams, NoiseStream], EstimateOutcome]


def fine_estimate(
    data,
    params: FineParams,
    stream: NoiseStream,
    *,
    coarse_fn: CoarseFn = coarse_estimate,
) -> EstimateOutcome:
    """Two-stage unbiased estimator for symmetric distributions.

    Stage 1 runs the coarse histogram on the first n1 samples divided by
    sigma and rescales the result.  Stage 2 clips the remaining n2
    samples to [coarse - c, coarse + c], averages, and adds
    Laplace(2c/(n2 eps)).  If the coarse stage fails, stage 2 falls back
    to the (0, delta) name-and-shame release, which keeps the whole
    estimator unbiased at the price of variance.  The stages use disjoint
    stream splits and disjoint data halves.
    """
    x = np.asarray(data, dtype=float)
    if x.size != params.n1 + params.n2:
        raise ValueError(f"expected {params.n1 + params.n2} samples, got {x.size}")
    head, tail = x[: params.n1], x[params.n1 :]
    budget = PrivacyBudget(params.eps, params.delta)

    coarse = coarse_fn(head / params.sigma, CoarseParams(params.eps, params.delta), stream.split(0))
    fine_stream = stream.split(1)

    if params.n2 == 0:
        logger.warning("fine stage has no samples; returning 0 by the empty-mean convention")
        return EstimateOutcome(0.0, budget)

    if coarse.failed:
        keep = fine_stream.bernoulli(params.delta, size=params.n2)
        value = float(np.dot(tail, keep)) / (params.n2 * params.delta)
        return EstimateOutcome(value, budget)

    center = params.sigma * coarse.value
    clipped = np.clip(tail, center - params.c, center + params.c)
    value = float(np.mean(clipped)) + fine_stream.laplace(2.0 * params.c / (params.n2 * params.eps))
    return EstimateOutcome(value, budget)
