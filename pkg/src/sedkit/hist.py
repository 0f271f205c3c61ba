"""Bin layout from batch error statistics and differentiable soft histograms.

A batch of absolute errors fixes the bin centers: the first center sits at
the batch mean, the last at mean + alpha_max * spread, and the rest are
evenly spaced on a linear or logarithmic (geometric) scale in between.
Each sample then spreads unit mass over the bins through a softmax of
Gaussian-kernel weights, which keeps the whole histogram differentiable
with respect to the sample values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor

B_FLOOR = 1e-6
MU_LOG_FLOOR = 1e-6

SCALES = ("linear", "logarithmic")


@dataclass(frozen=True)
class BinSpec:
    """Bin-center layout: centers[j] = mu + alphas[j] * b, j in [0, m]."""

    mu: float
    b: float
    alphas: tuple
    scale: str

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValueError(f"unknown scale {self.scale!r}")
        if len(self.alphas) < 2:
            raise ValueError("need at least two bin centers")
        if self.alphas[0] != 0.0:
            raise ValueError("first alpha must be 0")
        a = np.asarray(self.alphas)
        if not (np.diff(a) > 0).all():
            raise ValueError("alphas must be strictly increasing")
        if not (np.diff(self.centers()) > 0).all():
            raise ValueError("bin centers must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.alphas) - 1

    @property
    def bin_count(self) -> int:
        return len(self.alphas)

    def centers(self) -> np.ndarray:
        return self.mu + self.b * np.asarray(self.alphas)


@dataclass(frozen=True)
class Histogram:
    """Normalized soft histogram over a BinSpec; mass is a (m+1,) tensor."""

    spec: BinSpec
    mass: Tensor

    def __post_init__(self):
        if self.mass.shape != (self.spec.bin_count,):
            raise ValueError(f"mass shape {self.mass.shape} != ({self.spec.bin_count},)")
        total = float(self.mass.data.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"histogram mass sums to {total}, expected 1")
        if (self.mass.data <= 0).any():
            raise ValueError("histogram has non-positive mass; reduce lambda1")


def _detached(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def _as_mask(mask, shape) -> np.ndarray:
    m = np.asarray(getattr(mask, "data", mask)).astype(bool)
    if m.shape != shape:
        raise ValueError(f"mask shape {m.shape} != values shape {shape}")
    return m


def batch_stats(abs_errors, mask) -> tuple:
    """Masked mean and population standard deviation of absolute errors.

    Both come back as plain floats, detached from any tape: the bin layout
    is a constant of the batch, not something the loss deforms. The spread
    is floored at 1e-6 so constant-error batches still produce a usable
    bin layout.
    """
    vals = _detached(abs_errors)
    m = _as_mask(mask, vals.shape)
    picked = vals[m]
    if picked.size < 1:
        raise ValueError("batch_stats: no valid pixels")
    mu = float(picked.mean())
    b = max(float(picked.std()), B_FLOOR)
    return mu, b


def make_centers(mu: float, b: float, bin_count: int, scale: str,
                 alpha_max: float) -> BinSpec:
    """Lay out ``bin_count`` centers between mu and mu + alpha_max * b.

    Linear spacing interpolates the multipliers alpha_j; logarithmic
    spacing interpolates the center values geometrically (the multipliers
    themselves cannot be log-spaced since the first one is 0). The last
    bin has no right edge: assignment is soft, so it soaks up everything
    beyond it.
    """
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    if alpha_max <= 0:
        raise ValueError("alpha_max must be positive")
    if b <= 0:
        raise ValueError("b must be positive")
    m = bin_count - 1
    if scale == "linear":
        alphas = tuple(j * alpha_max / m for j in range(bin_count))
        return BinSpec(mu=float(mu), b=float(b), alphas=alphas, scale=scale)
    if scale == "logarithmic":
        mu_f = max(float(mu), MU_LOG_FLOOR)
        if not mu_f > 0:
            raise ValueError("logarithmic scale needs a positive first center")
        c0 = mu_f
        cm = mu_f + alpha_max * b
        centers = c0 * (cm / c0) ** (np.arange(bin_count) / m)
        alphas = tuple((c - mu_f) / b for c in centers)
        return BinSpec(mu=mu_f, b=float(b), alphas=alphas, scale=scale)
    raise ValueError(f"unknown scale {scale!r}")


def default_lambda2(spec: BinSpec) -> float:
    """Kernel width heuristic: (smallest adjacent center gap)^2 / 4."""
    gap = float(np.diff(spec.centers()).min())
    return gap * gap / 4.0


def soft_histogram(values, mask, spec: BinSpec, lambda1: float,
                   lambda2: Optional[float] = None) -> Histogram:
    """Differentiable histogram of the masked, nonnegative ``values``.

    Per sample i and bin j the kernel weight is
    ``w_j = lambda1 * exp(-(C_j - v_i)^2 / lambda2)``; a softmax over j
    turns the weights into a per-sample probability vector, and the
    histogram is the average of those vectors. Bin centers are constants:
    no gradient flows into the layout.

    Samples are accumulated in ascending value order (stable ties), so the
    result is bitwise independent of the input ordering.
    """
    v = values if isinstance(values, Tensor) else Tensor(values)
    mk = _as_mask(mask, v.shape)
    if lambda2 is None:
        lambda2 = default_lambda2(spec)
    if lambda2 <= 0:
        raise ValueError("lambda2 must be positive")
    flat_idx = np.flatnonzero(mk.reshape(-1))
    if flat_idx.size == 0:
        raise ValueError("soft_histogram: empty mask")
    picked_vals = v.data.reshape(-1)[flat_idx]
    if (picked_vals < 0).any():
        raise ValueError("soft_histogram: values must be nonnegative")
    order = np.argsort(picked_vals, kind="stable")
    sel = T.gather(v, flat_idx[order])

    weights = []
    for c in spec.centers():
        d = T.sub(float(c), sel)
        w = T.mul(T.exp(T.mul(T.mul(d, d), -1.0 / lambda2)), float(lambda1))
        weights.append(w)
    per_sample = T.softmax(T.stack(weights, axis=0), axis=0)
    mass = T.mean(per_sample, axis=1)
    return Histogram(spec=spec, mass=mass)
