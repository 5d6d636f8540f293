"""Monte Carlo plumbing: seeded substreams and the result record."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

# Replicas are generated in fixed-size blocks; each block owns the stream
# keyed by (seed, block index, tag), so results do not depend on how blocks
# are scheduled or merged.
BLOCK = 4096

# stream tags
WALK = 1
FIELD = 2
FIELD_RHS = 3
AUX = 4


def block_rng(seed: int, block: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(block), int(tag)])


def iter_blocks(n: int, block: int = BLOCK) -> Iterator[tuple[int, int, int]]:
    """Yield ``(block_index, start, size)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, block)):
        yield b, start, min(block, n - start)


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    @classmethod
    def from_samples(cls, values, seed=None, **params) -> "MCEstimate":
        v = np.asarray(values, dtype=float)
        n = v.size
        mean = float(v.mean())
        if n > 1:
            var = float(np.mean((v - mean) ** 2)) * n / (n - 1)
            se = math.sqrt(var / n)
        else:
            se = 0.0
        return cls(mean, se, n, seed, dict(params))

    def pool(self, other: "MCEstimate") -> "MCEstimate":
        """Merge two independent estimates of the same quantity.

        Uses the pooled mean and the pooled (unbiased) variance, so pooling
        the blocks of one run reproduces the single-run estimate.
        """
        n = self.n + other.n
        mean = (self.n * self.mean + other.n * other.mean) / n
        ss = 0.0
        for e in (self, other):
            var = e.stderr**2 * e.n
            ss += var * (e.n - 1) + e.n * (e.mean - mean) ** 2
        se = math.sqrt(ss / (n - 1) / n) if n > 1 else 0.0
        return MCEstimate(mean, se, n, self.seed, dict(self.params))

    def z_score(self, other: "MCEstimate") -> float:
        s = math.hypot(self.stderr, other.stderr)
        diff = self.mean - other.mean
        if s == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return abs(diff) / s

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n,
                "seed": self.seed, "params": self.params}
