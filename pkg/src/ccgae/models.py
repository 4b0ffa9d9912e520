"""Forward passes for the three autoencoder variants, plus checkpoint files.

* classic autoencoder: h = s_H(W x + b),  x_hat = s_O(W' h + b'), with the
  decoder weights optionally tied to the encoder transpose;
* naive gated autoencoder: a full three-way weight tensor contracted with a
  conditioning vector y, kept as the brute-force equivalence reference;
* factored gated autoencoder: x, y and h meet through a shared factor layer
  with elementwise interactions, encoder and decoder sharing the same three
  weight matrices.

Parameter containers are plain dataclasses over float64 numpy arrays.  They
are treated as read-only during forward passes; training replaces whole
blocks via `with_blocks`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import Activation, LossKind, activate, as_matrix, as_vector
from .errors import FormatError
from .rng import RngStream

GAE_MAGIC = b"CCGAE1"
DAE_MAGIC = b"CCDAE1"

_ACT_CODES = {Activation.IDENTITY: 0, Activation.LOGISTIC: 1, Activation.RELU: 2}
_ACT_FROM_CODE = {v: k for k, v in _ACT_CODES.items()}
_LOSS_CODES = {LossKind.SQUARED_ERROR: 0, LossKind.CROSS_ENTROPY: 1}
_LOSS_FROM_CODE = {v: k for k, v in _LOSS_CODES.items()}


def _check_len(v: np.ndarray, n: int, what: str, dim: str) -> np.ndarray:
    v = as_vector(v, what)
    if v.shape[0] != n:
        raise ValueError(f"{what} has length {v.shape[0]}, expected {dim}={n}")
    return v


@dataclass
class DaeParams:
    """Classic autoencoder weights.  `w_out is None` means tied decode (W^T)."""

    w: np.ndarray  # (n_h, n_x)
    b_h: np.ndarray  # (n_h,)
    b_out: np.ndarray  # (n_x,)
    hidden_act: Activation
    output_act: Activation
    w_out: np.ndarray | None = None  # (n_x, n_h) when untied

    def __post_init__(self):
        self.w = as_matrix(self.w, "w")
        self.b_h = _check_len(self.b_h, self.n_h, "b_h", "n_h")
        self.b_out = _check_len(self.b_out, self.n_x, "b_out", "n_x")
        if self.w_out is not None:
            self.w_out = as_matrix(self.w_out, "w_out")
            if self.w_out.shape != (self.n_x, self.n_h):
                raise ValueError(
                    f"w_out has shape {self.w_out.shape}, expected ({self.n_x}, {self.n_h})"
                )

    @property
    def n_h(self) -> int:
        return self.w.shape[0]

    @property
    def n_x(self) -> int:
        return self.w.shape[1]

    @property
    def tied(self) -> bool:
        return self.w_out is None

    def block_names(self) -> tuple[str, ...]:
        return ("w", "b_h", "b_out") if self.tied else ("w", "b_h", "b_out", "w_out")

    def blocks(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.block_names()}

    def with_blocks(self, blocks: dict[str, np.ndarray]) -> "DaeParams":
        return replace(self, **blocks)


@dataclass
class GaeParams:
    """Factored gated autoencoder weights; encode and decode share all three."""

    wx: np.ndarray  # (n_f, n_x)
    wy: np.ndarray  # (n_f, n_y)
    wh: np.ndarray  # (n_f, n_h)
    b_h: np.ndarray  # (n_h,)
    b_x: np.ndarray  # (n_x,)
    hidden_act: Activation
    output_act: Activation

    BLOCK_NAMES = ("wx", "wy", "wh", "b_h", "b_x")

    def __post_init__(self):
        self.wx = as_matrix(self.wx, "wx")
        self.wy = as_matrix(self.wy, "wy")
        self.wh = as_matrix(self.wh, "wh")
        n_f = self.wx.shape[0]
        if self.wy.shape[0] != n_f or self.wh.shape[0] != n_f:
            raise ValueError(
                "factor dimension disagrees: "
                f"wx has {n_f}, wy has {self.wy.shape[0]}, wh has {self.wh.shape[0]}"
            )
        self.b_h = _check_len(self.b_h, self.n_h, "b_h", "n_h")
        self.b_x = _check_len(self.b_x, self.n_x, "b_x", "n_x")

    @property
    def n_f(self) -> int:
        return self.wx.shape[0]

    @property
    def n_x(self) -> int:
        return self.wx.shape[1]

    @property
    def n_y(self) -> int:
        return self.wy.shape[1]

    @property
    def n_h(self) -> int:
        return self.wh.shape[1]

    def block_names(self) -> tuple[str, ...]:
        return self.BLOCK_NAMES

    def blocks(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.BLOCK_NAMES}

    def with_blocks(self, blocks: dict[str, np.ndarray]) -> "GaeParams":
        return replace(self, **blocks)


@dataclass
class NaiveGatedParams:
    """Unfactored gating: one (n_h, n_x) weight slice per component of y."""

    w: np.ndarray  # (n_y, n_h, n_x)
    b: np.ndarray  # (n_h,)
    hidden_act: Activation

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.ndim != 3:
            raise ValueError(f"w: expected (n_y, n_h, n_x) slices, got shape {self.w.shape}")
        self.b = _check_len(self.b, self.w.shape[1], "b", "n_h")


# -- classic autoencoder -----------------------------------------------------


def dae_encode(p: DaeParams, x: np.ndarray) -> np.ndarray:
    x = _check_len(x, p.n_x, "x", "n_x")
    return activate(p.hidden_act, p.w @ x + p.b_h)


def dae_decode(p: DaeParams, h: np.ndarray) -> np.ndarray:
    h = _check_len(h, p.n_h, "h", "n_h")
    w_dec = p.w.T if p.tied else p.w_out
    return activate(p.output_act, w_dec @ h + p.b_out)


def dae_reconstruct(p: DaeParams, x: np.ndarray) -> np.ndarray:
    return dae_decode(p, dae_encode(p, x))


# -- naive gated autoencoder -------------------------------------------------


def naive_gated_weights(p: NaiveGatedParams, y: np.ndarray) -> np.ndarray:
    """The y-weighted sum of weight slices: an effective (n_h, n_x) matrix."""
    y = _check_len(y, p.w.shape[0], "y", "n_y")
    return np.tensordot(y, p.w, axes=(0, 0))


def naive_gated_encode(p: NaiveGatedParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = _check_len(x, p.w.shape[2], "x", "n_x")
    return activate(p.hidden_act, naive_gated_weights(p, y) @ x + p.b)


# -- factored gated autoencoder ----------------------------------------------


def gae_encode_preact(p: GaeParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = _check_len(x, p.n_x, "x", "n_x")
    y = _check_len(y, p.n_y, "y", "n_y")
    return p.wh.T @ ((p.wx @ x) * (p.wy @ y)) + p.b_h


def gae_encode(p: GaeParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return activate(p.hidden_act, gae_encode_preact(p, x, y))


def gae_decode_x_preact(p: GaeParams, h: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = _check_len(h, p.n_h, "h", "n_h")
    y = _check_len(y, p.n_y, "y", "n_y")
    return p.wx.T @ ((p.wh @ h) * (p.wy @ y)) + p.b_x


def gae_decode_x(p: GaeParams, h: np.ndarray, y: np.ndarray) -> np.ndarray:
    return activate(p.output_act, gae_decode_x_preact(p, h, y))


def gae_reconstruct(p: GaeParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return gae_decode_x(p, gae_encode(p, x, y), y)


# -- initialization ----------------------------------------------------------


def _uniform_init(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    r = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-r, r, (rows, cols))


def init_gae(
    n_x: int,
    n_y: int,
    n_f: int,
    n_h: int,
    hidden_act: Activation,
    output_act: Activation,
    rng: RngStream,
) -> GaeParams:
    """Scaled uniform init per matrix, zero biases."""
    return GaeParams(
        wx=_uniform_init(rng, n_f, n_x),
        wy=_uniform_init(rng, n_f, n_y),
        wh=_uniform_init(rng, n_f, n_h),
        b_h=np.zeros(n_h),
        b_x=np.zeros(n_x),
        hidden_act=hidden_act,
        output_act=output_act,
    )


def init_dae(
    n_x: int,
    n_h: int,
    hidden_act: Activation,
    output_act: Activation,
    rng: RngStream,
    tied: bool = True,
) -> DaeParams:
    return DaeParams(
        w=_uniform_init(rng, n_h, n_x),
        b_h=np.zeros(n_h),
        b_out=np.zeros(n_x),
        hidden_act=hidden_act,
        output_act=output_act,
        w_out=None if tied else _uniform_init(rng, n_x, n_h),
    )


# -- checkpoint files ---------------------------------------------------------
#
# GAE layout: magic "CCGAE1", then n_x, n_y, n_f, n_h as u32 little-endian,
# then hidden/output activation and loss codes as single bytes, then the five
# blocks wx, wy, wh, b_h, b_x as little-endian float64, row-major.
#
# DAE layout mirrors it: magic "CCDAE1", n_x, n_h as u32, a tied flag byte,
# the three enum bytes, then w, b_h, b_out (and w_out when untied).


def _f64_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _read_f64(buf: bytes, offset: int, count: int, what: str) -> tuple[np.ndarray, int]:
    end = offset + 8 * count
    if end > len(buf):
        raise FormatError(f"truncated checkpoint: {what} needs {8 * count} bytes")
    out = np.frombuffer(buf[offset:end], dtype="<f8").astype(np.float64)
    return out, end


def _decode_act(code: int, what: str) -> Activation:
    if code not in _ACT_FROM_CODE:
        raise FormatError(f"bad {what} activation code {code}")
    return _ACT_FROM_CODE[code]


def save_gae(path: str | Path, p: GaeParams, loss: LossKind) -> None:
    header = GAE_MAGIC + struct.pack("<4I", p.n_x, p.n_y, p.n_f, p.n_h)
    header += bytes([_ACT_CODES[p.hidden_act], _ACT_CODES[p.output_act], _LOSS_CODES[loss]])
    body = b"".join(_f64_bytes(p.blocks()[name]) for name in p.BLOCK_NAMES)
    Path(path).write_bytes(header + body)


def load_gae(path: str | Path) -> tuple[GaeParams, LossKind]:
    buf = Path(path).read_bytes()
    if buf[:6] != GAE_MAGIC:
        raise FormatError(f"wrong magic: expected {GAE_MAGIC!r}, found {buf[:6]!r}")
    if len(buf) < 6 + 16 + 3:
        raise FormatError("truncated checkpoint: incomplete header")
    n_x, n_y, n_f, n_h = struct.unpack_from("<4I", buf, 6)
    hidden_act = _decode_act(buf[22], "hidden")
    output_act = _decode_act(buf[23], "output")
    if buf[24] not in _LOSS_FROM_CODE:
        raise FormatError(f"bad loss code {buf[24]}")
    loss = _LOSS_FROM_CODE[buf[24]]
    offset = 25
    wx, offset = _read_f64(buf, offset, n_f * n_x, "wx")
    wy, offset = _read_f64(buf, offset, n_f * n_y, "wy")
    wh, offset = _read_f64(buf, offset, n_f * n_h, "wh")
    b_h, offset = _read_f64(buf, offset, n_h, "b_h")
    b_x, offset = _read_f64(buf, offset, n_x, "b_x")
    if offset != len(buf):
        raise FormatError(f"checkpoint has {len(buf) - offset} trailing bytes")
    return (
        GaeParams(
            wx=wx.reshape(n_f, n_x),
            wy=wy.reshape(n_f, n_y),
            wh=wh.reshape(n_f, n_h),
            b_h=b_h,
            b_x=b_x,
            hidden_act=hidden_act,
            output_act=output_act,
        ),
        loss,
    )


def save_dae(path: str | Path, p: DaeParams, loss: LossKind) -> None:
    header = DAE_MAGIC + struct.pack("<2I", p.n_x, p.n_h)
    header += bytes(
        [1 if p.tied else 0, _ACT_CODES[p.hidden_act], _ACT_CODES[p.output_act], _LOSS_CODES[loss]]
    )
    body = _f64_bytes(p.w) + _f64_bytes(p.b_h) + _f64_bytes(p.b_out)
    if not p.tied:
        body += _f64_bytes(p.w_out)
    Path(path).write_bytes(header + body)


def load_dae(path: str | Path) -> tuple[DaeParams, LossKind]:
    buf = Path(path).read_bytes()
    if buf[:6] != DAE_MAGIC:
        raise FormatError(f"wrong magic: expected {DAE_MAGIC!r}, found {buf[:6]!r}")
    if len(buf) < 6 + 8 + 4:
        raise FormatError("truncated checkpoint: incomplete header")
    n_x, n_h = struct.unpack_from("<2I", buf, 6)
    tied = buf[14]
    if tied not in (0, 1):
        raise FormatError(f"bad tied flag {tied}")
    hidden_act = _decode_act(buf[15], "hidden")
    output_act = _decode_act(buf[16], "output")
    if buf[17] not in _LOSS_FROM_CODE:
        raise FormatError(f"bad loss code {buf[17]}")
    loss = _LOSS_FROM_CODE[buf[17]]
    offset = 18
    w, offset = _read_f64(buf, offset, n_h * n_x, "w")
    b_h, offset = _read_f64(buf, offset, n_h, "b_h")
    b_out, offset = _read_f64(buf, offset, n_x, "b_out")
    w_out = None
    if not tied:
        w_out_flat, offset = _read_f64(buf, offset, n_x * n_h, "w_out")
        w_out = w_out_flat.reshape(n_x, n_h)
    if offset != len(buf):
        raise FormatError(f"checkpoint has {len(buf) - offset} trailing bytes")
    return (
        DaeParams(
            w=w.reshape(n_h, n_x),
            b_h=b_h,
            b_out=b_out,
            hidden_act=hidden_act,
            output_act=output_act,
            w_out=w_out,
        ),
        loss,
    )


def load_checkpoint(path: str | Path) -> tuple[GaeParams | DaeParams, LossKind]:
    """Load either checkpoint kind by sniffing the magic."""
    with open(path, "rb") as f:
        magic = f.read(6)
    if magic == GAE_MAGIC:
        return load_gae(path)
    if magic == DAE_MAGIC:
        return load_dae(path)
    raise FormatError(f"wrong magic: {magic!r} is not a known checkpoint")
