"""Dense linear algebra helpers, activations, and counter-based RNG streams.

Matrices are plain float64 numpy arrays. Random draws come only from
explicitly passed :class:`RngStream` objects; there is no module-level
generator.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


class ShapeError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def sigmoid(x):
    """Logistic function, evaluated without overflow for any finite input."""
    x = np.asarray(x, dtype=np.float64)
    # exp(-|x|) never overflows; pick the algebraically equivalent branch
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return out if out.ndim else float(out)


def softplus(x):
    """log(1 + exp(x)) computed stably."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def log_sigmoid(x):
    return -softplus(-np.asarray(x, dtype=np.float64))


def softmax_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_row(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("softmax_row expects a vector")
    return softmax_rows(x)


def log_softmax_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def stable_hash(*parts) -> int:
    """64-bit hash of a tuple of str/int parts, identical across processes."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode() + b"\0")
        else:
            h.update(b"i" + struct.pack("<q", int(p)))
    return int.from_bytes(h.digest(), "little")


_MASK64 = (1 << 64) - 1


class RngStream:
    """Counter-based uniform stream keyed by ``(seed, stream_id)``.

    Backed by Philox-4x64: the key is the (seed, stream_id) pair and the
    position is ``counter``, so any draw can be reproduced from those three
    numbers alone. ``counter`` counts consumed uniforms.
    """

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def _generator_at(self, counter: int) -> np.random.Generator:
        # one Philox block yields four 64-bit words = four doubles
        block, offset = divmod(counter, 4)
        bitgen = np.random.Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        if block:
            bitgen.advance(block)
        gen = np.random.Generator(bitgen)
        if offset:
            gen.random(offset)
        return gen

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` draws in [0, 1); advances the counter by ``n``."""
        out = self._generator_at(self.counter).random(n)
        self.counter += n
        return out

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def spawn(self, stream_id: int) -> "RngStream":
        """A fresh independent stream sharing this seed."""
        return RngStream(self.seed, stream_id)

    def generator(self) -> np.random.Generator:
        """A numpy Generator positioned at this stream's counter.

        For bulk non-uniform draws (permutations, normals). The generator is
        detached: drawing from it does not advance ``counter``.
        """
        return self._generator_at(self.counter)


def uniform(stream: RngStream) -> float:
    return stream.uniform()
