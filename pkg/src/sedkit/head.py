"""Pixel-wise uncertainty head: pairwise disparity differences in, one
log-noise map per resolution level out.

The head never sees image content. Its input at each pixel is the vector
of pairwise differences between the K full-resolution disparity maps
(6 channels for K = 4), the idea being that levels disagree exactly where
matching is unreliable. A 3-layer MLP with widths 6 -> 8 -> 10 -> 4 and
biases has 190 parameters and is applied identically at every pixel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tape, Tensor

DEFAULT_LAYER_SIZES = (6, 8, 10, 4)
LEAKY_SLOPE = 0.01

_MAGIC = b"SEDHEAD1"


@dataclass
class PDV:
    """Per-pixel pairwise-differences features, flattened to (H*W, C).

    Channel order is fixed: pairs (a, b) with a < b in lexicographic
    order over the level indices, each holding map_a - map_b.
    """

    features: Tensor
    height: int
    width: int
    pairs: tuple


@dataclass
class UncertaintyHead:
    """MLP weights/biases; weights[i] has shape (fan_in, fan_out)."""

    weights: list
    biases: list

    def layer_sizes(self) -> tuple:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "UncertaintyHead":
        return UncertaintyHead(weights=[w.copy() for w in self.weights],
                               biases=[b.copy() for b in self.biases])


def init_head(seed: int, layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES) -> UncertaintyHead:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return UncertaintyHead(weights=weights, biases=biases)


def compute_pdv(pyramid) -> PDV:
    """Pairwise differences of the K full-resolution disparity maps."""
    maps = getattr(pyramid, "full", pyramid)
    if len(maps) < 2:
        raise ValueError("compute_pdv: need at least two disparity maps")
    ts = [m if isinstance(m, Tensor) else Tensor(m) for m in maps]
    shape = ts[0].shape
    if len(shape) != 2 or any(t.shape != shape for t in ts):
        raise ValueError("compute_pdv: maps must share one 2-D shape")
    h, w = shape
    n = h * w
    pairs = tuple(combinations(range(len(ts)), 2))
    cols = [T.reshape(T.sub(ts[a], ts[b]), (n,)) for a, b in pairs]
    return PDV(features=T.stack(cols, axis=1), height=h, width=w, pairs=pairs)


def head_params(head: UncertaintyHead, tape: Optional[Tape] = None) -> list:
    """Wrap the head's arrays as tensors, as tape variables when training."""
    if tape is None:
        return [(Tensor(w), Tensor(b)) for w, b in zip(head.weights, head.biases)]
    return [(tape.variable(w), tape.variable(b))
            for w, b in zip(head.weights, head.biases)]


def head_forward(head: UncertaintyHead, pdv: PDV,
                 params: Optional[list] = None) -> list:
    """Run the MLP at every pixel; returns one (H, W) log-noise map per
    output channel, index-aligned with the pyramid levels.

    Leaky-ReLU (slope 0.01) between layers, identity on the output.
    """
    sizes = head.layer_sizes()
    if pdv.features.shape[1] != sizes[0]:
        raise ValueError(
            f"head_forward: PDV has {pdv.features.shape[1]} channels, head expects {sizes[0]}")
    if params is None:
        params = head_params(head)
    h = pdv.features
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        h = T.affine(h, w, b)
        if i != last:
            h = T.leaky_relu(h, LEAKY_SLOPE)
    n = pdv.height * pdv.width
    k_out = sizes[-1]
    maps = []
    for k in range(k_out):
        col = T.gather(h, np.arange(n) * k_out + k)
        maps.append(T.reshape(col, (pdv.height, pdv.width)))
    return maps


def save_head(path, head: UncertaintyHead) -> None:
    """Flat little-endian float64 dump with a magic + layer-size header."""
    sizes = head.layer_sizes()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(sizes)))
        f.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w, b in zip(head.weights, head.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_head(path) -> UncertaintyHead:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != _MAGIC:
        raise ValueError("not an uncertainty-head file")
    off = 8
    if len(blob) < off + 4:
        raise ValueError("truncated head file")
    (n_sizes,) = struct.unpack_from("<I", blob, off)
    off += 4
    if n_sizes < 2 or len(blob) < off + 4 * n_sizes:
        raise ValueError("truncated head file")
    sizes = struct.unpack_from(f"<{n_sizes}I", blob, off)
    off += 4 * n_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        need = 8 * (fan_in * fan_out + fan_out)
        if len(blob) < off + need:
            raise ValueError("truncated head file")
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=off)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(blob):
        raise ValueError("trailing bytes in head file")
    return UncertaintyHead(weights=weights, biases=biases)
