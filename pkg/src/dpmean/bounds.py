"""Closed-form tradeoff curves and baselines.

Lower bounds on the error of any private low-bias mean estimator, the
matching upper bound achieved by the head/tail construction, the
amplification-by-shuffling epsilon calculator, and the non-private
baselines.  Every asymptotic constant left unspecified by the underlying
analysis is taken as 1, so each curve is meaningful up to unspecified
constant factors; callers overlaying Monte Carlo measurements should
treat them as shape references, except where a bound is exact
(`nonprivate_floor`, `hodges_mse`).

Singular parameter corners (vanishing denominators, log(1) = 0) return an
infinity sentinel rather than raising, so sweep grids stay total;
violations of a bound's stated validity regime raise :class:`RegimeError`
naming the violated condition, which curve emitters convert into a
``regime_ok=False`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "RegimeError",
    "TrilemmaPoint",
    "tau_from_moment",
    "trilemma_lower_bound",
    "optimal_gamma",
    "trilemma_lambda2",
    "tightness_upper_bound",
    "ShuffledBudget",
    "shuffled_epsilon",
    "shuffling_lower_bound",
    "nonprivate_floor",
    "hodges_estimator",
    "hodges_mse",
    "ksu_lower_bound",
]


class RegimeError(ValueError):
    """A bound was evaluated outside its stated validity regime."""


def _safe_inv(denom: float) -> float:
    if denom == 0.0:
        return math.inf
    if math.isinf(denom):
        return 0.0
    return 1.0 / denom


@dataclass(frozen=True)
class TrilemmaPoint:
    """One evaluation point of the bias-accuracy-privacy lower bound.

    ``tau`` measures how much estimator tail mass the delta budget can
    hide (tau = delta^(1-1/kappa) for a kappa-th moment bound on the
    error); ``gamma`` is the free parameter of the bound, clamped to
    [16 beta, 1/5].
    """

    n: int
    eps: float
    delta: float
    beta: float
    lam: float = 2.0
    tau: float = 0.0
    gamma: float = 0.2

    @classmethod
    def with_optimal_gamma(
        cls, n: int, eps: float, delta: float, beta: float, lam: float = 2.0, kappa: float = 2.0
    ) -> "TrilemmaPoint":
        tau = tau_from_moment(delta, kappa)
        return cls(n, eps, delta, beta, lam, tau, optimal_gamma(beta, lam, tau, eps))


def tau_from_moment(delta: float, kappa: float) -> float:
    """Tail parameter delta^(1 - 1/kappa) implied by a kappa-th moment
    bound on the estimator's error (kappa = 2 for plain bounded variance;
    tau decreases toward delta as kappa grows)."""
    if kappa <= 1:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    return delta ** (1.0 - 1.0 / kappa)


def trilemma_lower_bound(p: TrilemmaPoint) -> float:
    """Error lower bound for any (eps, delta)-DP estimator with bias at
    most beta over distributions with a lam-th central moment bound:

        (32 n sinh(eps) gamma^(1/(lam-1)) + 16 n tau / gamma)^-1

    valid for 16 beta <= gamma <= 1/5.
    """
    if p.n < 1 or p.eps < 0 or p.beta < 0 or p.tau < 0 or p.lam <= 1:
        raise ValueError("need n >= 1, eps, beta, tau >= 0 and lam > 1")
    if p.gamma < 16.0 * p.beta:
        raise RegimeError(f"gamma={p.gamma} below the lower clamp 16*beta={16.0 * p.beta}")
    if p.gamma > 0.2:
        raise RegimeError(f"gamma={p.gamma} above the upper clamp 1/5")
    denom = 32.0 * p.n * math.sinh(p.eps) * p.gamma ** (1.0 / (p.lam - 1.0)) + 16.0 * p.n * p.tau / p.gamma
    return _safe_inv(denom)


def optimal_gamma(beta: float, lam: float, tau: float, eps: float) -> float:
    """The gamma maximizing the trilemma bound, clamped to [16 beta, 1/5]:

        clip(((lam - 1) tau / (2 sinh eps))^(1 - 1/lam)).
    """
    if lam <= 1:
        raise ValueError(f"lam must exceed 1, got {lam}")
    if beta < 0 or tau < 0 or eps < 0:
        raise ValueError("beta, tau, eps must be non-negative")
    s = 2.0 * math.sinh(eps)
    if tau == 0.0:
        base = 0.0
    elif s == 0.0:
        base = math.inf
    else:
        base = ((lam - 1.0) * tau / s) ** (1.0 - 1.0 / lam)
    return min(max(base, 16.0 * beta), 0.2)


def trilemma_lambda2(n: int, eps: float, delta: float, beta: float) -> float:
    """Bounded-variance (lam = 2) error lower bound, combined with the
    non-private floor:

        max{ 1/sqrt(6(n+2)),
             1 / (64 n sinh(eps) max{16 beta, sqrt(sqrt(delta)/(2 sinh eps))}) }

    valid for beta <= 1/80 and delta <= ((2/25) sinh eps)^2.
    """
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    if beta < 0 or delta < 0:
        raise ValueError("beta and delta must be non-negative")
    if beta > 1.0 / 80.0:
        raise RegimeError(f"beta={beta} exceeds 1/80")
    sh = math.sinh(eps)
    cap = (0.08 * sh) ** 2
    if delta > cap:
        raise RegimeError(f"delta={delta} exceeds ((2/25) sinh eps)^2 = {cap}")
    floor = 1.0 / math.sqrt(6.0 * (n + 2.0))
    inner = max(16.0 * beta, math.sqrt(math.sqrt(delta) / (2.0 * sh)))
    return max(floor, _safe_inv(64.0 * n * sh * inner))


def tightness_upper_bound(n: int, eps: float, delta: float, beta: float, psi: float) -> float:
    """MSE achievable by the best of the three constructive mechanisms:

        1/n + min{ 1/(n^2 eps^2 beta^2) + beta^2,
                   psi^2/(n^(3/2) eps sqrt(delta)) + 1/(n^2 eps^2),
                   1/(n delta) }

    with all O-constants taken as 1.  Pass psi = inf to drop the middle
    branch; vanishing beta or delta disable their branches via the
    infinity sentinel.
    """
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    if beta < 0 or delta < 0 or psi <= 0:
        raise ValueError("beta, delta must be non-negative and psi positive")
    clip_branch = _safe_inv(n**2 * eps**2 * beta**2) + beta**2
    if math.isinf(psi):
        mixed_branch = math.inf
    else:
        mixed_branch = psi**2 * _safe_inv(n**1.5 * eps * math.sqrt(delta)) + 1.0 / (n**2 * eps**2)
    shame_branch = _safe_inv(n * delta)
    return 1.0 / n + min(clip_branch, mixed_branch, shame_branch)


class ShuffledBudget(NamedTuple):
    eps: float
    delta: float


def shuffled_epsilon(eps0: float, m: int, delta1: float, delta0: float = 0.0) -> ShuffledBudget:
    """Privacy amplification by shuffling for m blockwise (eps0, delta0)-DP
    computations:

        eps1 = ln(1 + 8 (e^eps0 - 1)/(e^eps0 + 1)
                      (sqrt(e^eps0 ln(4/delta1) / m) + e^eps0 / m)),

    valid for delta1 in [2 exp(-m / (16 e^eps0)), 1].  The returned delta
    is the composed delta1 + (e^eps1 + 1)(e^-eps0 / 2 + 1) m delta0.
    """
    if eps0 <= 0 or m < 1:
        raise ValueError("need eps0 > 0 and m >= 1")
    if delta0 < 0:
        raise ValueError(f"delta0 must be non-negative, got {delta0}")
    floor = 2.0 * math.exp(-m / (16.0 * math.exp(eps0)))
    if not floor <= delta1 <= 1.0:
        raise RegimeError(f"delta1={delta1} outside the admissible range [{floor}, 1]")
    e0 = math.exp(eps0)
    eps1 = math.log1p(8.0 * (e0 - 1.0) / (e0 + 1.0) * (math.sqrt(e0 * math.log(4.0 / delta1) / m) + e0 / m))
    delta = delta1 + (math.exp(eps1) + 1.0) * (math.exp(-eps0) / 2.0 + 1.0) * m * delta0
    return ShuffledBudget(eps1, delta)


def shuffling_lower_bound(n: int, eps: float, delta: float, beta: float) -> float:
    """MSE lower bound obtained by amplifying a low-bias estimator through
    block averaging and shuffling:

        1 / (n^2 eps^2 beta^2 ln(1/(n eps^2 beta^2)))

    valid for beta^2 <= 1/(n eps^2) and delta <= n^3 eps^4 beta^6 (all
    constants 1).  At the regime boundary n eps^2 beta^2 = 1 the log
    vanishes and the bound degenerates to the infinity sentinel.
    """
    if n < 1 or eps <= 0 or beta < 0 or delta < 0:
        raise ValueError("need n >= 1, eps > 0 and beta, delta >= 0")
    t = n * eps**2 * beta**2
    if t > 1.0:
        raise RegimeError(f"beta^2={beta ** 2} exceeds 1/(n eps^2) = {1.0 / (n * eps ** 2)}")
    cap = n**3 * eps**4 * beta**6
    if delta > cap:
        raise RegimeError(f"delta={delta} exceeds n^3 eps^4 beta^6 = {cap}")
    if t == 0.0:
        return math.inf
    return _safe_inv(n**2 * eps**2 * beta**2 * math.log(1.0 / t))


def nonprivate_floor(n: int) -> float:
    """Exact minimax MSE floor 1/(6(n+2)) for estimating a Bernoulli mean
    from n samples; binds every estimator, private or not."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 1.0 / (6.0 * (n + 2.0))


def hodges_estimator(data) -> float:
    """Minimax-optimal biased estimator of a Bernoulli mean:

        (sqrt(n)/2 + sum x_i) / (n + sqrt(n)).
    """
    x = np.asarray(data)
    if x.size == 0:
        raise ValueError("empty dataset")
    if not np.isin(x, (0, 1)).all():
        raise ValueError("data must be binary (0/1)")
    n = x.size
    return float((math.sqrt(n) / 2.0 + x.sum()) / (n + math.sqrt(n)))


def hodges_mse(n: int) -> float:
    """MSE of the minimax Bernoulli estimator, constant in p:
    1 / (4 (sqrt(n) + 1)^2)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 1.0 / (4.0 * (math.sqrt(n) + 1.0) ** 2)


def ksu_lower_bound(n: int, eps: float, delta: float) -> float:
    """MSE lower bound 1/(n (eps + delta)) for any (eps, delta)-DP mean
    estimator over bounded-variance distributions (constant taken as 1);
    the inner ingredient of the shuffling reduction."""
    if n < 1 or eps < 0 or delta < 0:
        raise ValueError("need n >= 1 and eps, delta >= 0")
    return _safe_inv(n * (eps + delta))
