"""
Seeded random streams

RngStream wraps a numpy Generator built from a SeedSequence. Child streams
are derived per purpose ("noise", "treatment", "selection", ...) so that
changing how one mechanism draws never shifts the draws of another.
"""

import zlib
from typing import Optional

import numpy as np


def _purpose_key(purpose: str) -> int:
    """Stable integer key for a purpose name (independent of PYTHONHASHSEED)"""
    return zlib.crc32(purpose.encode('utf-8'))


class RngStream:
    """Deterministic random stream with a draw counter"""

    def __init__(self, seed: int, spawn_key: tuple = ()):
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        self.counter = 0
        sequence = np.random.SeedSequence(entropy=self.seed & 0xFFFFFFFFFFFFFFFF,
                                          spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(sequence))

    def spawn(self, purpose: str) -> 'RngStream':
        """Derive an independent child stream for a named purpose"""
        return RngStream(self.seed, self.spawn_key + (_purpose_key(purpose),))

    def child_seed(self) -> int:
        """Draw a 63-bit integer seed (for torch generators and sklearn)"""
        self.counter += 1
        return int(self._gen.integers(0, 2 ** 63 - 1))

    def uniform(self, low: float = 0.0, high: float = 1.0,
                size: Optional[int] = None) -> np.ndarray:
        self.counter += 1 if size is None else int(size)
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0,
               size: Optional[int] = None) -> np.ndarray:
        self.counter += 1 if size is None else int(size)
        return self._gen.normal(loc, scale, size)

    def laplace(self, loc: float = 0.0, scale: float = 1.0,
                size: Optional[int] = None) -> np.ndarray:
        """Laplace draws by inverse CDF"""
        u = self.uniform(0.0, 1.0, size) - 0.5
        return loc - scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))

    def pareto(self, scale: float, shape: float,
               size: Optional[int] = None) -> np.ndarray:
        """Pareto type I draws (support [scale, inf)) by inverse CDF"""
        u = self.uniform(0.0, 1.0, size)
        return scale * np.power(1.0 - u, -1.0 / shape)

    def lognormal(self, mu: float = 0.0, sigma: float = 1.0,
                  size: Optional[int] = None) -> np.ndarray:
        return np.exp(self.normal(mu, sigma, size))

    def bernoulli(self, p, size: Optional[int] = None) -> np.ndarray:
        """Bernoulli(p) as integers; p may be an array matching size"""
        p = np.asarray(p, dtype=float)
        if size is None and p.ndim > 0:
            size = p.shape[0]
        u = self.uniform(0.0, 1.0, size)
        return (u < p).astype(np.int64)


def new_rng(seed: int) -> RngStream:
    """Create the root stream for a seed"""
    return RngStream(seed)
