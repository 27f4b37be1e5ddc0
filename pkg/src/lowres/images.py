"""8-bit binary PGM output and image tiling for samples and receptive fields."""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np


def write_pgm(image, path) -> Path:
    """Write a [0, 1] grayscale image as binary P5 PGM (values scaled to 0..255).

    Out-of-range values are clamped with a warning.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if np.any(~np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        warnings.warn("image values outside [0, 1] clamped", stacklevel=2)
        img = np.clip(img, 0.0, 1.0)
    data = np.rint(img * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = data.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Minimal P5 reader (comments allowed) returning uint8 pixels."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    return np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos + 1).reshape(h, w)


def tile(tiles, n_rows: int, n_cols: int, fill: float = 1.0) -> np.ndarray:
    """Arrange equally shaped tiles row-major on a grid with 1-pixel separators."""
    tiles = [np.asarray(t, dtype=np.float64) for t in tiles]
    if not tiles:
        raise ValueError("nothing to tile")
    th, tw = tiles[0].shape
    if any(t.shape != (th, tw) for t in tiles):
        raise ValueError("tiles must share one shape")
    if len(tiles) > n_rows * n_cols:
        raise ValueError(f"{len(tiles)} tiles do not fit a {n_rows}x{n_cols} grid")
    out = np.full((n_rows * (th + 1) - 1, n_cols * (tw + 1) - 1), fill)
    for i, t in enumerate(tiles):
        r, c = divmod(i, n_cols)
        out[r * (th + 1):r * (th + 1) + th, c * (tw + 1):c * (tw + 1) + tw] = t
    return out


def grid_shape(n: int) -> tuple[int, int]:
    """Square-ish (rows, cols) layout for ``n`` tiles, cols >= rows."""
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols


def normalize_columns(W) -> np.ndarray:
    """Min-max scale each column to [0, 1]; constant columns become 0.5."""
    W = np.asarray(W, dtype=np.float64)
    lo, hi = W.min(axis=0), W.max(axis=0)
    span = hi - lo
    out = np.full_like(W, 0.5)
    ok = span > 0
    out[:, ok] = (W[:, ok] - lo[ok]) / span[ok]
    return out


def receptive_field_image(W, image_shape) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != image_shape[0] * image_shape[1]:
        raise ValueError(f"weight rows {W.shape[0]} do not reshape to {tuple(image_shape)}")
    norm = normalize_columns(W)
    tiles = [norm[:, j].reshape(image_shape) for j in range(W.shape[1])]
    return tile(tiles, *grid_shape(len(tiles)), fill=0.0)


def write_receptive_fields(W, image_shape, path) -> Path:
    """Render each column of ``W`` (visible x hidden) as a tile and save as PGM."""
    return write_pgm(receptive_field_image(W, image_shape), path)
