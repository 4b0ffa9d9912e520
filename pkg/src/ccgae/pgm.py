"""Binary PGM (P5) output: tile a list of vectors into one grayscale grid.

PGM keeps the output bit-exact and dependency-free; `convert grid.pgm
grid.png` (ImageMagick) or any image viewer handles the rest.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

GRAY = 128  # border and unused-cell fill


def to_byte_tile(v: np.ndarray, tile_rows: int, tile_cols: int) -> np.ndarray:
    """Map values through clamp(v, 0, 1) * 255 with round-half-up."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (tile_rows * tile_cols,):
        raise ValueError(
            f"vector has length {v.shape[0] if v.ndim == 1 else v.shape}, "
            f"expected {tile_rows}*{tile_cols}={tile_rows * tile_cols}"
        )
    bytes_ = np.floor(np.clip(v, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return bytes_.reshape(tile_rows, tile_cols)


def write_pgm_grid(
    vectors,
    tile_rows: int,
    tile_cols: int,
    grid_cols: int,
    out_path: str | Path,
) -> None:
    """Write vectors as a row-major tile grid with 1-pixel gray separators."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("no vectors to render")
    if grid_cols < 1:
        raise ValueError(f"grid_cols must be >= 1, got {grid_cols}")
    grid_rows = -(-len(vectors) // grid_cols)  # ceil division
    width = grid_cols * tile_cols + (grid_cols - 1)
    height = grid_rows * tile_rows + (grid_rows - 1)
    canvas = np.full((height, width), GRAY, dtype=np.uint8)
    for k, v in enumerate(vectors):
        r, c = divmod(k, grid_cols)
        top = r * (tile_rows + 1)
        left = c * (tile_cols + 1)
        canvas[top : top + tile_rows, left : left + tile_cols] = to_byte_tile(
            v, tile_rows, tile_cols
        )
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(out_path).write_bytes(header + canvas.tobytes())
