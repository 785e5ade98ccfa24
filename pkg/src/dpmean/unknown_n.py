"""Mean estimation when the dataset size itself is private.

Two routes:

* a generic reduction that privately underestimates the size with
  truncated integer-Laplace noise, subsamples down to that size, and runs
  any fixed-size mechanism on the subset (preserving unbiasedness, at a
  factor-two cost in the privacy parameters), and
* a direct pure-DP estimator for distributions on a known bounded
  interval, which adds Student-t noise scaled to a smooth upper bound on
  the empirical mean's local sensitivity.  Data-dependent noise under
  pure DP is exactly what the smooth-sensitivity calibration buys.

Neighbors here may add, remove, or replace one element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mechanisms import EstimateOutcome, PrivacyBudget
from .noise import NoiseStream

__all__ = [
    "SizeEstimate",
    "SmoothSensParams",
    "smooth_sens_params",
    "private_size",
    "size_oblivious_wrap",
    "mean_local_sensitivity",
    "mean_smooth_sensitivity",
    "smooth_sens_mean",
]


@dataclass(frozen=True)
class SizeEstimate:
    """Private underestimate of a dataset size.

    The truncation guarantees n - 2v <= value <= n deterministically (so
    the estimate can be negative when n < 2v; callers treat anything
    below their minimum size as failure).
    """

    value: int
    v: int


@dataclass(frozen=True)
class SmoothSensParams:
    """Calibration of the Student-t smooth-sensitivity mechanism.

    The privacy cost of adding tau * S(x) * t_d noise to a statistic with
    beta-smooth sensitivity bound S is

        beta (d + 1) + (d + 1) / (2 sqrt(d) tau).
    """

    beta: float
    tau: float
    d: int = 3

    @property
    def total_eps(self) -> float:
        return self.beta * (self.d + 1) + (self.d + 1) / (2.0 * math.sqrt(self.d) * self.tau)


def smooth_sens_params(eps: float) -> SmoothSensParams:
    """Split an eps budget as beta = eps/12, tau = sqrt(3)/eps with t(3)
    noise; beta's share is eps/3 and tau's is 2 eps/3, summing exactly to
    eps."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return SmoothSensParams(beta=eps / 12.0, tau=math.sqrt(3.0) / eps, d=3)


def private_size(n: int, eps: float, delta: float, stream: NoiseStream) -> SizeEstimate:
    """(eps, delta)-DP underestimate of ``n`` for add/remove neighbors.

    Returns n + clip(Z, -v, v) - v with Z integer-Laplace at scale 1/eps
    and v = ceil(ln(2/delta)/eps); the clipping truncates the noise so
    the estimate never exceeds n, and it disturbs the distribution with
    probability at most delta / (e^eps + 1).
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    v = math.ceil(math.log(2.0 / delta) / eps)
    z = stream.discrete_laplace(eps)
    return SizeEstimate(n + min(max(z, -v), v) - v, v)


Family = Callable[[np.ndarray, NoiseStream], EstimateOutcome]


def size_oblivious_wrap(
    family: Family,
    data,
    eps: float,
    delta: float,
    n0: int,
    stream: NoiseStream,
) -> EstimateOutcome:
    """Run a fixed-size mechanism family without revealing the true size.

    Draws a private size N, fails if N is below the family's minimum size
    ``n0``, and otherwise runs the family on a uniformly random N-subset
    of the data.  Each stage spends (eps, delta), so the wrapper reports
    a (2 eps, 2 delta) budget; because any realized subset is still i.i.d.
    from the population, an unbiased family stays unbiased.
    """
    if n0 < 1:
        raise ValueError(f"minimum size must be >= 1, got {n0}")
    x = np.asarray(data, dtype=float)
    est = private_size(x.size, eps, delta, stream.split(0))
    budget = PrivacyBudget(2.0 * eps, min(1.0, 2.0 * delta))
    if est.value < n0:
        return EstimateOutcome(None, budget)
    assert est.value <= x.size, "private size must never exceed the true size"
    idx = stream.split(1).permutation(x.size)[: est.value]
    out = family(x[idx], stream.split(2))
    return EstimateOutcome(out.value, budget)


def mean_local_sensitivity(n: int, a: float, b: float) -> float:
    """Local sensitivity of the empirical mean of [a, b]-valued data at a
    dataset of size n, under add/remove/replace; the empty mean is 0."""
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return (b - a) / max(n, 1)


def mean_smooth_sensitivity(n: int, a: float, b: float, beta: float) -> float:
    """Closed-form beta-smooth upper bound on the mean's local sensitivity:

        (b - a) * max{exp(-beta (n - 1)), 1 / max(n, 1)}.

    Dominates exp(-beta k) times the local sensitivity at every dataset k
    additions/removals away, while changing by at most a factor e^beta
    between neighboring sizes.
    """
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return (b - a) * max(math.exp(-beta * (n - 1)), 1.0 / max(n, 1))


def smooth_sens_mean(data, eps: float, a: float, b: float, stream: NoiseStream) -> EstimateOutcome:
    """Pure-DP unbiased mean for data supported on [a, b], size unknown.

    Adds tau * S * Z to the empirical mean (0 on empty input), where S is
    the beta-smooth sensitivity bound at the realized size and Z is
    Student-t with 3 degrees of freedom.  The t noise is symmetric with a
    finite second moment, so the estimate is unbiased with noise variance
    3 tau^2 S^2, and the (beta, tau) split makes the mechanism eps-DP
    under add/remove/replace.
    """
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if not a <= 0.0 <= b:
        raise ValueError(f"support [a, b] must contain 0 (the empty-input mean), got [{a}, {b}]")
    x = np.asarray(data, dtype=float)
    if x.size and (x.min() < a or x.max() > b):
        raise ValueError(f"data must lie in [{a}, {b}]; clip it first")
    params = smooth_sens_params(eps)
    s = mean_smooth_sensitivity(x.size, a, b, params.beta)
    center = float(x.mean()) if x.size else 0.0
    value = center + params.tau * s * stream.student_t(params.d)
    return EstimateOutcome(value, PrivacyBudget(eps, 0.0))
