"""Monte Carlo estimates that carry their uncertainty."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MCEstimate", "from_samples"]


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with standard error (sample std / sqrt(n))."""

    mean: float
    stderr: float
    n: int

    def z_score(self, target: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.stderr

    def z_against(self, other: "MCEstimate") -> float:
        se = math.hypot(self.stderr, other.stderr)
        if se == 0.0:
            return 0.0 if self.mean == other.mean else math.inf
        return (self.mean - other.mean) / se

    def __str__(self) -> str:
        return f"{self.mean:.6g} +- {self.stderr:.2g} (n={self.n})"


def from_samples(samples: np.ndarray) -> MCEstimate:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    mean = float(x.mean())
    stderr = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean=mean, stderr=stderr, n=n)
