"""Seedable noise sources.

Every randomized routine in this package draws exclusively from a
:class:`NoiseStream`, so a whole run is a deterministic function of the
master seed and the split path that produced each stream.  Samplers are
implemented from first principles on top of the stream's primitive draws
(inverse CDF for Laplace, a geometric difference for the integer Laplace,
a normal/chi-square ratio for Student's t) so their densities match the
textbook forms exactly.

None of this is cryptographic randomness; resistance to floating-point
side channels is explicitly out of scope.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "NoiseStream",
    "laplace_sample",
    "discrete_laplace_sample",
    "student_t_sample",
    "bernoulli_sample",
    "uniform_offset_sample",
    "discrete_laplace_pmf",
]

_MASK64 = (1 << 64) - 1


class NoiseStream:
    """Seedable, splittable source of randomness.

    A stream is identified by ``(seed, path)``: two streams built from the
    same pair yield bit-identical draw sequences.  ``split`` derives child
    streams by appending counters to the path, so parallel Monte Carlo
    trials each own an independent stream that is reproducible from the
    master seed alone.  A stream should be consumed by a single logical
    thread; it is cheap to create and safe to send elsewhere before first
    use.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(int(p) & _MASK64 for p in path)
        self._gen: np.random.Generator | None = None

    def __repr__(self) -> str:
        return f"NoiseStream(seed={self.seed}, path={self.path})"

    def split(self, *indices: int) -> "NoiseStream":
        """Return the child stream at ``path + indices``.

        Splitting never advances this stream, and children with distinct
        indices are statistically independent of each other and of the
        parent.
        """
        return NoiseStream(self.seed, self.path + indices)

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, materialized on first use."""
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    # -- primitive draws ------------------------------------------------

    def uniform(self, size=None):
        """Uniform draw(s) on [0, 1)."""
        return self.generator.random(size)

    def normal(self, size=None):
        """Standard normal draw(s)."""
        return self.generator.standard_normal(size)

    def permutation(self, n: int) -> np.ndarray:
        """Uniformly random permutation of ``range(n)``."""
        return self.generator.permutation(n)

    # -- distribution samplers ------------------------------------------

    def laplace(self, scale: float, size=None):
        """Laplace draw(s): density (1/2b) exp(-|x|/b), mean 0, variance 2b^2.

        Sampled by inverting the CDF on a single uniform draw, so the
        median uniform value 0.5 maps to exactly 0.
        """
        if scale <= 0:
            raise ValueError(f"Laplace scale must be positive, got {scale}")
        u = self.uniform(size)
        if size is None:
            v = u - 0.5
            if v == -0.5:  # log1p(-1) guard, probability 2**-53
                v = np.nextafter(-0.5, 0.0)
            return -scale * math.copysign(1.0, v) * math.log1p(-2.0 * abs(v))
        v = u - 0.5
        v = np.where(v == -0.5, np.nextafter(-0.5, 0.0), v)
        return -scale * np.sign(v) * np.log1p(-2.0 * np.abs(v))

    def discrete_laplace(self, eps: float, size=None):
        """Integer Laplace draw(s): Pr[Z=z] = exp(-eps|z|)(e^eps-1)/(e^eps+1).

        Built as the difference of two i.i.d. geometric counts with
        success probability 1 - e^-eps.
        """
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        log_q = -eps
        g1 = self._geometric(log_q, size)
        g2 = self._geometric(log_q, size)
        return g1 - g2

    def _geometric(self, log_q: float, size=None):
        # Failures before the first success, success probability 1 - q;
        # inverse CDF on 1-u keeps the argument of log inside (0, 1].
        u = self.uniform(size)
        if size is None:
            return int(math.log1p(-u) / log_q)
        return np.floor(np.log1p(-u) / log_q).astype(np.int64)

    def student_t(self, d: int, size=None):
        """Student-t draw(s) with ``d`` degrees of freedom.

        Ratio construction: standard normal over the root of a scaled
        chi-square.  For d >= 3 the mean is 0 and the variance d/(d-2).
        """
        if d < 1:
            raise ValueError(f"degrees of freedom must be >= 1, got {d}")
        z = self.generator.standard_normal(size)
        v = self.generator.chisquare(d, size)
        return z / np.sqrt(v / d)

    def bernoulli(self, p: float, size=None):
        """Bernoulli draw(s): 1 with probability ``p``, else 0."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        u = self.uniform(size)
        if size is None:
            return int(u < p)
        return (u < p).astype(np.int64)

    def uniform_offset(self, size=None):
        """Uniform draw(s) on [-1/2, +1/2)."""
        return self.uniform(size) - 0.5


# -- functional aliases over the stream methods -------------------------


def laplace_sample(scale: float, stream: NoiseStream) -> float:
    return stream.laplace(scale)


def discrete_laplace_sample(eps: float, stream: NoiseStream) -> int:
    return stream.discrete_laplace(eps)


def student_t_sample(d: int, stream: NoiseStream) -> float:
    return stream.student_t(d)


def bernoulli_sample(p: float, stream: NoiseStream) -> int:
    return stream.bernoulli(p)


def uniform_offset_sample(stream: NoiseStream) -> float:
    return stream.uniform_offset()


def discrete_laplace_pmf(z, eps: float):
    """Probability mass of the integer Laplace distribution at ``z``."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    z = np.asarray(z)
    return np.exp(-eps * np.abs(z)) * (math.expm1(eps) / (math.exp(eps) + 1.0))
