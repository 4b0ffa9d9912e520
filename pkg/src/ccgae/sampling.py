"""Class-conditional Markov-chain sampling.

A chain alternates the learned reconstruction map with the corruption
process while the conditioning label stays fixed and noise-free.  Each step
records three vectors: the expected value (the conditional mean x_hat), the
state (a Bernoulli draw from it, or x_hat itself for real-valued data), and
the corrupted state handed to the next step.  Step 1 reconstructs from the
raw initial vector; corruption always happens after reconstruction.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import as_vector
from .corruption import CorruptionSpec, corrupt
from .data import one_hot
from .errors import FormatError
from .models import GaeParams, gae_reconstruct
from .rng import RngStream

TRACE_MAGIC = b"CCTRC1"


class ChainInit(Enum):
    ZEROS = "zeros"
    DATA_EXAMPLE = "data-example"
    CUSTOM = "custom"


class OutputMode(Enum):
    BERNOULLI_SAMPLE = "bernoulli-sample"
    EXPECTED_VALUE = "expected-value"


class ChainStep(NamedTuple):
    expected: np.ndarray
    state: np.ndarray
    corrupted: np.ndarray


@dataclass
class ChainConfig:
    steps: int
    corruption: CorruptionSpec
    output_mode: OutputMode = OutputMode.BERNOULLI_SAMPLE
    init: ChainInit = ChainInit.ZEROS
    init_vector: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.init is not ChainInit.ZEROS and self.init_vector is None:
            raise ValueError(f"init={self.init.value} requires an init_vector")

    def initial_state(self, n_x: int) -> np.ndarray:
        if self.init is ChainInit.ZEROS:
            return np.zeros(n_x)
        v = as_vector(self.init_vector, "init_vector")
        if v.shape[0] != n_x:
            raise ValueError(f"init_vector has length {v.shape[0]}, expected n_x={n_x}")
        return v.copy()


@dataclass
class ChainTrace:
    """Per-step chain records, stacked as (steps, n_x) arrays."""

    label: int
    expected: np.ndarray
    state: np.ndarray
    corrupted: np.ndarray

    @property
    def steps(self) -> int:
        return self.expected.shape[0]

    @property
    def n_x(self) -> int:
        return self.expected.shape[1]


def chain_step(
    p: GaeParams,
    x_tilde: np.ndarray,
    y: np.ndarray,
    cfg: ChainConfig,
    rng: RngStream,
) -> ChainStep:
    """One transition: reconstruct, draw the state, corrupt it for the next step."""
    expected = gae_reconstruct(p, x_tilde, y)
    if cfg.output_mode is OutputMode.BERNOULLI_SAMPLE:
        state = rng.bernoulli(expected)
    else:
        state = expected
    corrupted = corrupt(cfg.corruption, state, rng)
    return ChainStep(expected=expected, state=state, corrupted=corrupted)


def run_chain(
    p: GaeParams,
    label: int,
    cfg: ChainConfig,
    rng: RngStream | None = None,
) -> ChainTrace:
    """Run a conditional chain for cfg.steps steps, recording every step.

    Deterministic given cfg.seed (or an explicit rng).  The first step
    reconstructs directly from the initial state.
    """
    if not 0 <= label < p.n_y:
        raise ValueError(f"label {label} out of range for {p.n_y} classes")
    if rng is None:
        rng = RngStream.from_seed(cfg.seed).split("chain", label)
    y = one_hot(label, p.n_y)
    expected = np.empty((cfg.steps, p.n_x))
    state = np.empty((cfg.steps, p.n_x))
    corrupted = np.empty((cfg.steps, p.n_x))
    x_tilde = cfg.initial_state(p.n_x)
    for t in range(cfg.steps):
        step = chain_step(p, x_tilde, y, cfg, rng)
        expected[t] = step.expected
        state[t] = step.state
        corrupted[t] = step.corrupted
        x_tilde = step.corrupted
    return ChainTrace(label=label, expected=expected, state=state, corrupted=corrupted)


# -- trace export ----------------------------------------------------------------
#
# Layout: magic "CCTRC1", then step count and n_x as u32 little-endian, then the
# per-step expected-value vectors as little-endian float64, step-major.


def save_trace(path: str | Path, trace: ChainTrace) -> None:
    header = TRACE_MAGIC + struct.pack("<2I", trace.steps, trace.n_x)
    Path(path).write_bytes(header + np.ascontiguousarray(trace.expected, dtype="<f8").tobytes())


def load_trace_expected(path: str | Path) -> np.ndarray:
    """Read back the expected-value vectors of an exported trace."""
    buf = Path(path).read_bytes()
    if buf[:6] != TRACE_MAGIC:
        raise FormatError(f"wrong magic: expected {TRACE_MAGIC!r}, found {buf[:6]!r}")
    if len(buf) < 14:
        raise FormatError("truncated trace: incomplete header")
    steps, n_x = struct.unpack_from("<2I", buf, 6)
    expected_bytes = 8 * steps * n_x
    if len(buf) != 14 + expected_bytes:
        raise FormatError(f"trace has {len(buf) - 14} payload bytes, expected {expected_bytes}")
    return np.frombuffer(buf, dtype="<f8", offset=14).astype(np.float64).reshape(steps, n_x)
