"""Seeded, platform-stable randomness.

Everything random in this package flows through :class:`StableRng`,
which consumes only uniform draws from a numpy PCG64 bit generator.
Gaussians are produced by the Box-Muller transform on that uniform
stream and shuffles by Fisher-Yates over `integers()`, so corpora and
trained parameters reproduce bit-exactly for a given seed regardless of
platform. Sub-streams (e.g. the two training stages) are derived with
``SeedSequence.spawn``.
"""

import numpy as np


class StableRng:
    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, n):
        return [StableRng(s) for s in self._seq.spawn(n)]

    def uniform(self, size=None):
        """Uniform draws in [0, 1)."""
        return self._gen.random(size=size)

    def uniform_in(self, low, high, size=None):
        return low + (high - low) * self._gen.random(size=size)

    def integers(self, low, high):
        """One integer in [low, high)."""
        return int(self._gen.integers(low, high))

    def normal(self, size):
        """Standard normal draws via Box-Muller on the uniform stream."""
        n = int(np.prod(size)) if not np.isscalar(size) else int(size)
        n_pairs = (n + 1) // 2
        # random() is in [0, 1); shift to (0, 1] so the log is finite
        u1 = 1.0 - self._gen.random(size=n_pairs)
        u2 = self._gen.random(size=n_pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * n_pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        z = z[:n]
        return z.reshape(size) if not np.isscalar(size) else z

    def shuffle_index(self, n):
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = int(self._gen.integers(0, i + 1))
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def init_uniform(self, shape, fan_in):
        """Layer init: U(-a, a) with a = 1/sqrt(fan_in)."""
        a = 1.0 / np.sqrt(fan_in)
        return self.uniform_in(-a, a, size=shape)
