"""Dense float64 math shared by every other module: products, activations, losses.

All public operations work on plain numpy arrays (1-D vectors, 2-D row-major
matrices) in 64-bit precision and validate shapes up front so dimension bugs
surface with both shapes named instead of as broadcast surprises.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

# Predictions are clipped into [EPS_CLIP, 1 - EPS_CLIP] before any log.
EPS_CLIP = 1e-7

# Logistic outputs are clamped to the open interval (0, 1): saturation must
# never round to an exact 0.0 or 1.0.
_LOGISTIC_LO = np.finfo(np.float64).tiny
_LOGISTIC_HI = 1.0 - np.finfo(np.float64).epsneg


class Activation(Enum):
    IDENTITY = "identity"
    LOGISTIC = "logistic"
    RELU = "relu"


class LossKind(Enum):
    SQUARED_ERROR = "squared-error"
    CROSS_ENTROPY = "cross-entropy"


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array."""
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"{name}: expected a 1-D vector, got shape {out.shape}")
    return out


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array (row-major)."""
    out = np.ascontiguousarray(m, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D matrix, got shape {out.shape}")
    return out


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with an explicit shape check."""
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ValueError(
            f"matvec: matrix is {m.shape[0]}x{m.shape[1]} but vector has length {v.shape[0]}"
        )
    return m @ v


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of two equal-length vectors."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"hadamard: length {a.shape[0]} vs length {b.shape[0]}")
    return a * b


def _logistic(v: np.ndarray) -> np.ndarray:
    # exp(-|v|) never overflows; the two branches are algebraically equal.
    z = np.exp(-np.abs(v))
    out = np.where(v >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    return np.clip(out, _LOGISTIC_LO, _LOGISTIC_HI)


def activate(act: Activation, v: np.ndarray) -> np.ndarray:
    """Apply an activation elementwise."""
    v = as_vector(v)
    if act is Activation.IDENTITY:
        return v.copy()
    if act is Activation.LOGISTIC:
        return _logistic(v)
    if act is Activation.RELU:
        return np.maximum(v, 0.0)
    raise ValueError(f"unknown activation {act!r}")


def loss_value(kind: LossKind, target: np.ndarray, prediction: np.ndarray) -> float:
    """Reconstruction loss, summed over dimensions.

    Squared error is sum((target - prediction)^2).  Cross-entropy is the
    negative Bernoulli log-likelihood with the prediction clipped to
    [EPS_CLIP, 1 - EPS_CLIP]; targets are expected in [0, 1].
    """
    target = as_vector(target, "target")
    prediction = as_vector(prediction, "prediction")
    if target.shape != prediction.shape:
        raise ValueError(
            f"loss: target length {target.shape[0]} vs prediction length {prediction.shape[0]}"
        )
    if kind is LossKind.SQUARED_ERROR:
        diff = target - prediction
        return float(np.dot(diff, diff))
    if kind is LossKind.CROSS_ENTROPY:
        p = np.clip(prediction, EPS_CLIP, 1.0 - EPS_CLIP)
        return float(-np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)))
    raise ValueError(f"unknown loss kind {kind!r}")
