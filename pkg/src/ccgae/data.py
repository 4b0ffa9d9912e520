"""Dataset loading and batching.

Supported containers: the big-endian IDX image/label files common for digit
datasets (gzip-compressed files are sniffed and decompressed transparently),
and a raw little-endian fallback ("CCRAW1") for real-valued datasets that are
not redistributable in IDX form.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .rng import RngStream

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
RAW_MAGIC = b"CCRAW1"

# Anything above this is a corrupt header, not a real dataset.
_MAX_PIXELS = 2**40


@dataclass
class Dataset:
    """Row-major examples in [0, 1] plus integer class labels."""

    examples: np.ndarray  # (n_examples, n_x)
    labels: np.ndarray  # (n_examples,)
    n_classes: int

    def __post_init__(self):
        self.examples = np.ascontiguousarray(self.examples, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.examples.ndim != 2:
            raise ValueError(f"examples must be 2-D, got shape {self.examples.shape}")
        if self.labels.shape != (self.examples.shape[0],):
            raise ValueError(
                f"{self.labels.shape[0]} labels for {self.examples.shape[0]} examples"
            )
        if self.n_classes < 1:
            raise ValueError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(
                f"labels must lie in [0, {self.n_classes}), found "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )
        if self.examples.size and not np.all(np.isfinite(self.examples)):
            raise ValueError("examples contain non-finite values")
        if self.examples.size and (self.examples.min() < 0.0 or self.examples.max() > 1.0):
            raise ValueError("example values must lie in [0, 1]")

    @property
    def n_examples(self) -> int:
        return self.examples.shape[0]

    @property
    def n_x(self) -> int:
        return self.examples.shape[1]


def _read_maybe_gzip(path: str | Path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def load_idx_images(path: str | Path) -> np.ndarray:
    """Parse an IDX image file into (count, rows*cols) pixels scaled to [0, 1]."""
    buf = _read_maybe_gzip(path)
    if len(buf) < 16:
        raise FormatError(f"truncated IDX image header: {len(buf)} bytes")
    magic, count, rows, cols = struct.unpack_from(">4I", buf, 0)
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"wrong magic {magic} in image file (expected {IDX_IMAGE_MAGIC})")
    total = count * rows * cols
    if total > _MAX_PIXELS:
        raise FormatError(f"dimension overflow: {count} x {rows} x {cols} pixels")
    if len(buf) - 16 != total:
        raise FormatError(
            f"truncated IDX payload: header declares {total} pixels, found {len(buf) - 16}"
        )
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=16).astype(np.float64) / 255.0
    return pixels.reshape(count, rows * cols)


def load_idx_labels(path: str | Path) -> np.ndarray:
    buf = _read_maybe_gzip(path)
    if len(buf) < 8:
        raise FormatError(f"truncated IDX label header: {len(buf)} bytes")
    magic, count = struct.unpack_from(">2I", buf, 0)
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"wrong magic {magic} in label file (expected {IDX_LABEL_MAGIC})")
    if count > _MAX_PIXELS:
        raise FormatError(f"dimension overflow: {count} labels")
    if len(buf) - 8 != count:
        raise FormatError(
            f"truncated IDX payload: header declares {count} labels, found {len(buf) - 8}"
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=8).astype(np.int64)


def _quantize(values: np.ndarray) -> np.ndarray:
    # round-half-up onto 0..255; exact inverse of the /255 load scaling
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_idx_images(path: str | Path, images: np.ndarray, rows: int, cols: int) -> None:
    """Write (n, rows*cols) values in [0, 1] as an IDX image file."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 2 or images.shape[1] != rows * cols:
        raise ValueError(
            f"images have shape {images.shape}, expected (n, {rows}*{cols}={rows * cols})"
        )
    header = struct.pack(">4I", IDX_IMAGE_MAGIC, images.shape[0], rows, cols)
    Path(path).write_bytes(header + _quantize(images).tobytes())


def write_idx_labels(path: str | Path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or (labels.size and (labels.min() < 0 or labels.max() > 255)):
        raise ValueError("labels must be a 1-D sequence of bytes (0..255)")
    header = struct.pack(">2I", IDX_LABEL_MAGIC, labels.shape[0])
    Path(path).write_bytes(header + labels.astype(np.uint8).tobytes())


def binarize(m: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold values in [0, 1] to {0, 1}; entries equal to the threshold go to 1."""
    return (np.asarray(m, dtype=np.float64) >= threshold).astype(np.float64)


def one_hot(label: int, n_classes: int) -> np.ndarray:
    if not 0 <= label < n_classes:
        raise ValueError(f"label {label} out of range for {n_classes} classes")
    v = np.zeros(n_classes)
    v[label] = 1.0
    return v


def minibatches(d: Dataset, batch_size: int, rng: RngStream) -> list[np.ndarray]:
    """A seeded permutation of all indices cut into consecutive slices.

    The final slice may be short; every index appears exactly once.
    """
    if d.n_examples == 0:
        raise ValueError("cannot batch an empty dataset")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = rng.permutation(d.n_examples)
    return [perm[i : i + batch_size] for i in range(0, d.n_examples, batch_size)]


# -- raw fallback container ----------------------------------------------------
#
# Layout: magic "CCRAW1", then n_examples, n_x, n_classes as u32 little-endian,
# then pixels as little-endian float64 (row-major), then labels as i32.


def save_raw_dataset(path: str | Path, d: Dataset) -> None:
    header = RAW_MAGIC + struct.pack("<3I", d.n_examples, d.n_x, d.n_classes)
    body = np.ascontiguousarray(d.examples, dtype="<f8").tobytes()
    body += np.ascontiguousarray(d.labels, dtype="<i4").tobytes()
    Path(path).write_bytes(header + body)


def load_raw_dataset(path: str | Path) -> Dataset:
    buf = Path(path).read_bytes()
    if buf[:6] != RAW_MAGIC:
        raise FormatError(f"wrong magic: expected {RAW_MAGIC!r}, found {buf[:6]!r}")
    if len(buf) < 18:
        raise FormatError("truncated raw dataset: incomplete header")
    n_examples, n_x, n_classes = struct.unpack_from("<3I", buf, 6)
    if n_examples * n_x > _MAX_PIXELS:
        raise FormatError(f"dimension overflow: {n_examples} x {n_x} values")
    expected = 18 + 8 * n_examples * n_x + 4 * n_examples
    if len(buf) != expected:
        raise FormatError(f"raw dataset has {len(buf)} bytes, expected {expected}")
    pixels = np.frombuffer(buf, dtype="<f8", offset=18, count=n_examples * n_x)
    labels = np.frombuffer(buf, dtype="<i4", offset=18 + 8 * n_examples * n_x)
    return Dataset(
        examples=pixels.reshape(n_examples, n_x).astype(np.float64),
        labels=labels.astype(np.int64),
        n_classes=n_classes,
    )
