"""Shared test doubles for the noise stream.

The mechanisms only ever touch randomness through a NoiseStream, so unit
tests can swap in degenerate streams: ZeroNoiseStream silences every
noise source (making randomized mechanisms pointwise checkable),
RecordingStream logs each sampler draw tagged with its split path, and
ReplayStream feeds prescribed draws back, which is how the exact
translation/reflection couplings are exercised.
"""

from collections import defaultdict

import numpy as np
import pytest

from dpmean.noise import NoiseStream

# One committed seed for the whole suite; statistical tolerances below are
# asserted against the deterministic run it produces.
TEST_SEED = 20230817


class ZeroNoiseStream(NoiseStream):
    """All noise draws are exactly 0; Bernoulli fires only at p == 1.

    ``offset`` pins the coarse histogram offset draw.
    """

    def __init__(self, offset: float = 0.0):
        super().__init__(0)
        self._offset = offset

    def split(self, *indices):
        return self

    def laplace(self, scale, size=None):
        return 0.0 if size is None else np.zeros(size)

    def discrete_laplace(self, eps, size=None):
        return 0 if size is None else np.zeros(size, dtype=np.int64)

    def student_t(self, d, size=None):
        return 0.0 if size is None else np.zeros(size)

    def bernoulli(self, p, size=None):
        hit = int(p >= 1.0)
        return hit if size is None else np.full(size, hit, dtype=np.int64)

    def uniform_offset(self, size=None):
        return self._offset if size is None else np.full(size, self._offset)


class ScriptedStream(NoiseStream):
    """Feeds prescribed draws; every split shares the same queues."""

    def __init__(self, *, offsets=(), laplace=(), discrete_laplace=(), bernoulli=(), student_t=()):
        super().__init__(0)
        self._q = {
            "offset": list(offsets),
            "laplace": list(laplace),
            "discrete_laplace": list(discrete_laplace),
            "bernoulli": list(bernoulli),
            "student_t": list(student_t),
        }

    def split(self, *indices):
        return self

    def _pop(self, key):
        if not self._q[key]:
            raise AssertionError(f"scripted stream ran out of '{key}' draws")
        return self._q[key].pop(0)

    def uniform_offset(self, size=None):
        return self._pop("offset")

    def laplace(self, scale, size=None):
        if size is None:
            return self._pop("laplace")
        return np.asarray([self._pop("laplace") for _ in range(size)], dtype=float)

    def discrete_laplace(self, eps, size=None):
        if size is None:
            return self._pop("discrete_laplace")
        return np.asarray([self._pop("discrete_laplace") for _ in range(size)], dtype=np.int64)

    def bernoulli(self, p, size=None):
        if size is None:
            return self._pop("bernoulli")
        return np.asarray([self._pop("bernoulli") for _ in range(size)], dtype=np.int64)

    def student_t(self, d, size=None):
        if size is None:
            return self._pop("student_t")
        return np.asarray([self._pop("student_t") for _ in range(size)], dtype=float)


class RecordingStream(NoiseStream):
    """Real stream that logs every sampler draw as (path, kind, value)."""

    def __init__(self, seed, path=(), log=None):
        super().__init__(seed, path)
        self.log = [] if log is None else log

    def split(self, *indices):
        return RecordingStream(self.seed, self.path + indices, self.log)

    def uniform_offset(self, size=None):
        v = super().uniform_offset(size)
        self.log.append((self.path, "offset", v))
        return v

    def laplace(self, scale, size=None):
        v = super().laplace(scale, size)
        self.log.append((self.path, "laplace", v))
        return v

    def bernoulli(self, p, size=None):
        v = super().bernoulli(p, size)
        self.log.append((self.path, "bernoulli", v))
        return v

    def discrete_laplace(self, eps, size=None):
        v = super().discrete_laplace(eps, size)
        self.log.append((self.path, "discrete_laplace", v))
        return v

    def student_t(self, d, size=None):
        v = super().student_t(d, size)
        self.log.append((self.path, "student_t", v))
        return v


class ReplayStream(NoiseStream):
    """Replays a script of {path: {kind: [values...]}} built from a log."""

    def __init__(self, script, path=()):
        super().__init__(0, path)
        self._script = script

    def split(self, *indices):
        return ReplayStream(self._script, self.path + indices)

    def _pop(self, kind):
        queue = self._script.get(self.path, {}).get(kind)
        if not queue:
            raise AssertionError(f"replay stream has no '{kind}' draw at path {self.path}")
        return queue.pop(0)

    def uniform_offset(self, size=None):
        return self._pop("offset")

    def laplace(self, scale, size=None):
        if size is None:
            return self._pop("laplace")
        return np.asarray([self._pop("laplace") for _ in range(size)], dtype=float)

    def bernoulli(self, p, size=None):
        if size is None:
            return self._pop("bernoulli")
        v = self._pop("bernoulli")
        return np.asarray(v, dtype=np.int64)

    def discrete_laplace(self, eps, size=None):
        if size is None:
            return self._pop("discrete_laplace")
        return np.asarray([self._pop("discrete_laplace") for _ in range(size)], dtype=np.int64)

    def student_t(self, d, size=None):
        if size is None:
            return self._pop("student_t")
        return np.asarray([self._pop("student_t") for _ in range(size)], dtype=float)


def script_from_log(log, transform=None):
    """Group a RecordingStream log into ReplayStream's script shape.

    ``transform(path, kind, values) -> values`` rewrites the draw list of
    each (path, kind) group, which is how mirrored couplings are built.
    """
    script = defaultdict(lambda: defaultdict(list))
    for path, kind, value in log:
        script[path][kind].append(value)
    if transform is not None:
        for path in list(script):
            for kind in list(script[path]):
                script[path][kind] = list(transform(path, kind, script[path][kind]))
    return {path: dict(kinds) for path, kinds in script.items()}


def mirror_offset(t: float) -> float:
    """Reflection convention for the bin offset: -t folded into [-1/2, 1/2)."""
    m = -t
    return -0.5 if m >= 0.5 else m


@pytest.fixture
def zero_stream():
    return ZeroNoiseStream()
