"""General-purpose private mean estimators.

Three building blocks and their combinations:

* a pure-DP noisy clipped mean whose clipping interval is widened enough
  to keep the bias below a prescribed level,
* the ``name-and-shame`` release that is exactly unbiased at privacy cost
  (0, delta),
* the combined head/tail estimator that clips-and-noises the bulk of the
  distribution and corrects the clipped-off tail with name-and-shame,
  giving an unbiased (eps, delta)-DP estimator,

plus the clipping primitives they share and a block-averaging combinator
with an optional row-wise shuffle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .noise import NoiseStream

__all__ = [
    "PrivacyBudget",
    "MomentModel",
    "EstimateOutcome",
    "clip",
    "clipped_mean",
    "clip_bias_bound",
    "clipped_mean_laplace",
    "threshold_clipped_mean",
    "name_and_shame_mean",
    "combined_clip_halfwidth",
    "combined_unbiased_mean",
    "shuffle_blocks",
    "block_average_estimator",
]

Mechanism = Callable[[np.ndarray, NoiseStream], "EstimateOutcome"]


@dataclass(frozen=True)
class PrivacyBudget:
    """An (eps, delta) differential-privacy guarantee."""

    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class MomentModel:
    """Distributional assumptions a mechanism is calibrated against.

    The population mean is promised to lie in [a, b] and the central
    moment of order ``lam`` is promised to satisfy
    E|X - mu|^lam <= psi^lam.  These are declared model inputs; they are
    never validated against the data, since such a check would itself
    leak.
    """

    a: float
    b: float
    lam: float = 2.0
    psi: float = 1.0

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError(f"need a <= b, got a={self.a}, b={self.b}")
        if self.lam <= 1:
            raise ValueError(f"moment order must exceed 1, got {self.lam}")
        if self.psi <= 0:
            raise ValueError(f"moment bound must be positive, got {self.psi}")


@dataclass(frozen=True)
class EstimateOutcome:
    """A mechanism's output: an estimate (or the failure sentinel) plus
    the privacy budget actually spent.

    ``value is None`` encodes the failure sentinel; only mechanisms
    documented to fail (the coarse stage and the unknown-size wrapper
    below its minimum size) ever produce it.
    """

    value: Optional[float]
    budget: PrivacyBudget

    @property
    def failed(self) -> bool:
        return self.value is None


def clip(x: float, a: float, b: float) -> float:
    """Project ``x`` onto [a, b]."""
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    return min(max(x, a), b)


def clipped_mean(data, lo: float, hi: float) -> float:
    """Empirical mean after clipping every point to [lo, hi].

    This is the pre-noise statistic of the clip-and-noise mechanisms; its
    replacement sensitivity is (hi - lo) / n.
    """
    if lo > hi:
        raise ValueError(f"need lo <= hi, got lo={lo}, hi={hi}")
    x = np.asarray(data, dtype=float)
    if x.size == 0:
        raise ValueError("empty dataset")
    return float(np.mean(np.clip(x, lo, hi)))


def clip_bias_bound(lam: float, moment: float, gap: float) -> float:
    """Upper bound on the bias introduced by clipping.

    For a distribution with central moment E|X - mu|^lam <= moment and a
    clipping interval whose nearest endpoint is ``gap`` away from the
    mean, the clipped mean differs from the true mean by at most

        (lam-1)^(lam-1) / lam^lam * moment / gap^(lam-1).
    """
    if lam <= 1:
        raise ValueError(f"moment order must exceed 1, got {lam}")
    if moment < 0:
        raise ValueError(f"moment bound must be non-negative, got {moment}")
    if gap <= 0:
        raise ValueError(f"gap must be positive, got {gap}")
    lead = (lam - 1.0) ** (lam - 1.0) / lam**lam
    return lead * moment / gap ** (lam - 1.0)


def clipped_mean_laplace(
    data,
    model: MomentModel,
    eps: float,
    beta: float,
    stream: NoiseStream,
) -> EstimateOutcome:
    """Pure-DP noisy clipped mean with bias at most ``beta``.

    The clipping interval [a, b] is widened by beta^(-1/(lam-1)) on each
    side, which caps the clipping bias at ``beta``; Laplace noise scaled
    to the widened interval's sensitivity then provides eps-DP.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if beta <= 0:
        raise ValueError(f"bias target must be positive, got {beta}")
    x = np.asarray(data, dtype=float)
    if x.size == 0:
        raise ValueError("empty dataset")
    widen = beta ** (-1.0 / (model.lam - 1.0))
    lo, hi = model.a - widen, model.b + widen
    value = clipped_mean(x, lo, hi) + stream.laplace((hi - lo) / (eps * x.size))
    return EstimateOutcome(value, PrivacyBudget(eps, 0.0))


def threshold_clipped_mean(data, threshold: float, eps: float, stream: NoiseStream) -> EstimateOutcome:
    """Noisy clipped mean for non-negative data with clipping threshold T.

    Clips to [0, T], averages, and adds Laplace(T / (eps n)).  This is the
    mechanism driven through the threshold sweeps of the benchmark
    harness.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = np.asarray(data, dtype=float)
    if x.size == 0:
        raise ValueError("empty dataset")
    value = clipped_mean(x, 0.0, threshold) + stream.laplace(threshold / (eps * x.size))
    return EstimateOutcome(value, PrivacyBudget(eps, 0.0))


def name_and_shame_mean(data, delta: float, stream: NoiseStream) -> EstimateOutcome:
    """(0, delta)-DP unbiased mean: release each point scaled by 1/delta
    with probability delta, else contribute 0.

    Exactly unbiased for every distribution; the variance pays a factor
    1/(delta n), which is what makes this a baseline rather than a
    serious estimator.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    x = np.asarray(data, dtype=float)
    if x.size == 0:
        raise ValueError("empty dataset")
    keep = stream.bernoulli(delta, size=x.size)
    value = float(np.dot(x, keep)) / (delta * x.size)
    return EstimateOutcome(value, PrivacyBudget(0.0, delta))


def combined_clip_halfwidth(n: int, eps: float, delta: float, psi: float, lam: float) -> float:
    """Widening c used by the combined estimator:

        c = (n eps^2 psi^lam (lam-2) / (4 lam^2 delta))^(1/lam).

    Chosen to balance the Laplace noise of the clipped head against the
    name-and-shame variance of the tail.
    """
    if lam <= 2:
        raise ValueError(f"moment order must exceed 2, got {lam}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if eps <= 0 or psi <= 0 or n < 1:
        raise ValueError("need eps > 0, psi > 0, n >= 1")
    return (n * eps**2 * psi**lam * (lam - 2.0) / (4.0 * lam**2 * delta)) ** (1.0 / lam)


def combined_unbiased_mean(
    data,
    model: MomentModel,
    budget: PrivacyBudget,
    stream: NoiseStream,
) -> EstimateOutcome:
    """Unbiased (eps, delta)-DP mean estimator.

    Splits each sample into a clipped head and a residual tail around the
    widened interval [a - c, b + c]: the head goes through the noisy
    clipped mean (eps-DP), the residuals through name-and-shame
    ((0, delta)-DP).  The tail release makes the head's clipping bias
    cancel exactly, so the sum is unbiased for every population, and the
    total budget is (eps, delta) by composition.
    """
    eps, delta = budget.eps, budget.delta
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    x = np.asarray(data, dtype=float)
    if x.size == 0:
        raise ValueError("empty dataset")
    n = x.size
    c = combined_clip_halfwidth(n, eps, delta, model.psi, model.lam)
    lo, hi = model.a - c, model.b + c
    clipped = np.clip(x, lo, hi)
    head = float(np.mean(clipped)) + stream.laplace((hi - lo) / (eps * n))
    keep = stream.bernoulli(delta, size=n)
    tail = float(np.dot(x - clipped, keep)) / (delta * n)
    return EstimateOutcome(head + tail, PrivacyBudget(eps, delta))


def shuffle_blocks(blocks: Sequence[np.ndarray], stream: NoiseStream) -> list[np.ndarray]:
    """Row-wise shuffle of equal-size blocks.

    Viewing the m blocks as the columns of an n x m matrix, each row is
    permuted by an independent uniform permutation of the block indices.
    On i.i.d. inputs this leaves the joint distribution unchanged, which
    is exactly what makes it useful: it buys privacy amplification for
    free.
    """
    mat = np.stack([np.asarray(b, dtype=float) for b in blocks])  # m x n
    m, n = mat.shape
    for j in range(n):
        mat[:, j] = mat[stream.permutation(m), j]
    return [mat[i] for i in range(m)]


def block_average_estimator(
    inner: Mechanism,
    blocks: Sequence,
    shuffle: bool,
    stream: NoiseStream,
) -> EstimateOutcome:
    """Run ``inner`` on each of m equal-size blocks and average the outputs.

    Averaging leaves the bias of ``inner`` unchanged while cutting its
    variance by a factor of m.  With ``shuffle`` set, the row-wise
    shuffle is applied first; each block still sees n i.i.d. samples, so
    bias and MSE are unaffected, but the composition then enjoys
    amplification-by-shuffling.
    """
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    if not blocks:
        raise ValueError("need at least one block")
    n = blocks[0].size
    if any(b.size != n for b in blocks):
        raise ValueError("blocks must all have the same size")
    if shuffle:
        blocks = shuffle_blocks(blocks, stream.split(0))
    outs = [inner(blocks[i], stream.split(1, i)) for i in range(len(blocks))]
    budget = outs[0].budget
    if any(o.failed for o in outs):
        return EstimateOutcome(None, budget)
    return EstimateOutcome(float(np.mean([o.value for o in outs])), budget)
