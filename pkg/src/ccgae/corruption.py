"""Corruption processes: the stochastic map from a clean vector to a noisy one.

Three variants, used both for denoising training and inside the sampling
chain: additive Gaussian noise, masking (zeroing) noise, and salt-and-pepper
noise.  A coordinate selected by salt-and-pepper counts as corrupted even if
the drawn value coincides with its current one.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import as_vector
from .rng import RngStream


class CorruptionKind(Enum):
    GAUSSIAN = "gaussian"
    MASKING = "masking"
    SALT_PEPPER = "salt-pepper"


@dataclass(frozen=True)
class CorruptionSpec:
    """Noise kind plus its level: sigma for Gaussian, rho in [0, 1] otherwise."""

    kind: CorruptionKind
    level: float

    def __post_init__(self):
        if self.kind is CorruptionKind.GAUSSIAN:
            if self.level < 0.0:
                raise ValueError(f"gaussian sigma must be >= 0, got {self.level}")
        else:
            if not 0.0 <= self.level <= 1.0:
                raise ValueError(
                    f"{self.kind.value} rho must be in [0, 1], got {self.level}"
                )


def corrupt(spec: CorruptionSpec, x: np.ndarray, rng: RngStream) -> np.ndarray:
    """Draw one corrupted version of `x`.

    Gaussian adds N(0, sigma) per dimension (sigma is a standard deviation).
    Masking zeroes each dimension independently with probability rho.
    Salt-and-pepper selects each dimension with probability rho and sets it
    to 0 or 1 with equal probability.  Unselected coordinates pass through
    bit-identical.
    """
    x = as_vector(x, "x")
    n = x.shape[0]
    if spec.kind is CorruptionKind.GAUSSIAN:
        return x + rng.normal(0.0, spec.level, n)
    if spec.kind is CorruptionKind.MASKING:
        hit = rng.random(n) < spec.level
        return np.where(hit, 0.0, x)
    if spec.kind is CorruptionKind.SALT_PEPPER:
        hit = rng.random(n) < spec.level
        value = (rng.random(n) < 0.5).astype(np.float64)
        return np.where(hit, value, x)
    raise ValueError(f"unknown corruption kind {spec.kind!r}")
