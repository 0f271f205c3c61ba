"""Deterministic synthetic data: textured stereo pairs with known
disparity, and direct Laplacian error fields for testing distribution
matching without any matcher in the way.

All randomness comes from counter-based Philox generators keyed by the
seed, so a scene is a pure function of its arguments regardless of
iteration order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SyntheticScene:
    """Stereo pair with ground truth; right(x) samples left at x + d(x).

    ``valid`` is False where the warp would read outside the left image,
    mirroring how real ground truth is missing near occlusions.
    """

    left: np.ndarray
    right: np.ndarray
    disparity: np.ndarray
    valid: np.ndarray
    seed: int


@dataclass
class ErrorSample:
    """Laplace(0, scale(x, y)) draws plus the scale field that made them."""

    errors: np.ndarray
    scale_field: np.ndarray


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def _smooth(a: np.ndarray, sigma: float) -> np.ndarray:
    radius = max(1, int(3 * sigma))
    x = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    pad = np.pad(a, radius, mode="reflect")
    out = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 1, pad)
    out = np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 0, out)
    return out


def _texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Band-limited noise plus a gentle ramp, normalized to [0, 1].

    No periodic components: repeating texture would hand the matcher
    false correspondences at multiples of the period.
    """
    noise = _smooth(rng.standard_normal((height, width)), 1.0)
    noise = (noise - noise.min()) / max(np.ptp(noise), 1e-12)
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    gx, gy = rng.uniform(-0.3, 0.3, size=2)
    ramp = gx * xx / max(width - 1, 1) + gy * yy / max(height - 1, 1)
    img = 0.85 * noise + 0.15 * ramp
    return (img - img.min()) / max(np.ptp(img), 1e-12)


def _piecewise_disparity(rng: np.random.Generator, height: int, width: int,
                         d_max: int) -> np.ndarray:
    """2 to 4 regions split by random lines, each a fronto-parallel or
    gently sloped plane, clipped to [0, 0.9 * d_max]."""
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    xn = xx / max(width - 1, 1)
    yn = yy / max(height - 1, 1)
    n_lines = int(rng.integers(1, 3))  # 1 or 2 lines: 2..4 regions
    label = np.zeros((height, width), dtype=int)
    for i in range(n_lines):
        theta = rng.uniform(0, np.pi)
        offset = rng.uniform(0.25, 0.75)
        side = (np.cos(theta) * xn + np.sin(theta) * yn) > offset
        label = 2 * label + side.astype(int)
    hi = 0.9 * d_max
    disp = np.zeros((height, width))
    for region in np.unique(label):
        base = rng.uniform(0.1 * d_max, hi)
        if rng.random() < 0.5:
            sx = sy = 0.0  # fronto-parallel
        else:
            sx, sy = rng.uniform(-0.15 * d_max, 0.15 * d_max, size=2)
        plane = base + sx * xn + sy * yn
        disp = np.where(label == region, plane, disp)
    return np.clip(disp, 0.0, float(d_max))


def _sample_rows(img: np.ndarray, x_coords: np.ndarray) -> np.ndarray:
    """Bilinear sample along rows at fractional x positions."""
    h, w = img.shape
    x = np.clip(x_coords, 0.0, w - 1.0)
    lo = np.floor(x).astype(int)
    hi = np.minimum(lo + 1, w - 1)
    frac = x - lo
    rows = np.arange(h)[:, None]
    return img[rows, lo] * (1 - frac) + img[rows, hi] * frac


def gen_scene(seed: int, width: int = 64, height: int = 64,
              d_max: int = 16, sparsity: float = 0.0) -> SyntheticScene:
    """Textured pair with a piecewise-smooth disparity field.

    The right view inverse-warps the left: right(x, y) samples the left
    image at x + d(x, y), so a matcher comparing left pixel x against
    right pixel x - d recovers d. Pixels whose source column falls
    outside the left image are invalid; ``sparsity`` additionally drops
    that fraction of valid pixels at random, mimicking sparse ground
    truth without touching the images.
    """
    if width < 32 or height < 32:
        raise ValueError("scene must be at least 32x32")
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must be in [0, 1)")
    rng = _rng(seed)
    left = _texture(rng, height, width)
    disp = _piecewise_disparity(rng, height, width, d_max)
    xx = np.arange(width)[None, :] + disp
    valid = xx <= width - 1
    right = np.where(valid, _sample_rows(left, xx), 0.0)
    if sparsity > 0.0:
        keep = _rng(seed, stream=2).random((height, width)) >= sparsity
        valid = valid & keep
    return SyntheticScene(left=left, right=right, disparity=disp,
                          valid=valid, seed=seed)


def gen_shift_scene(seed: int, width: int = 64, height: int = 64,
                    shift: int = 4) -> SyntheticScene:
    """Constant integer-shift pair for exact oracles: right(x) = left(x + shift)."""
    if width < 32 or height < 32:
        raise ValueError("scene must be at least 32x32")
    if shift < 0 or shift >= width:
        raise ValueError("shift must be in [0, width)")
    rng = _rng(seed)
    left = _texture(rng, height, width)
    right = np.empty_like(left)
    if shift:
        right[:, :width - shift] = left[:, shift:]
        right[:, width - shift:] = 0.0
    else:
        right[:] = left
    valid = np.zeros((height, width), dtype=bool)
    valid[:, :width - shift if shift else width] = True
    disp = np.full((height, width), float(shift))
    return SyntheticScene(left=left, right=right, disparity=disp,
                          valid=valid, seed=seed)


def gen_laplace_errors(seed: int, shape, scale_field) -> ErrorSample:
    """Inverse-CDF Laplace draws: eps = -b * sign(u - 1/2) * ln(1 - 2|u - 1/2|).

    ``scale_field`` is a positive scalar or per-pixel array broadcastable
    to ``shape``. The log argument is floored at the smallest positive
    double so a pathological u = 0 cannot produce an infinity.
    """
    shape = tuple(shape)
    b = np.broadcast_to(np.asarray(scale_field, dtype=np.float64), shape).copy()
    if (b <= 0).any():
        raise ValueError("scale_field must be positive")
    u = _rng(seed, stream=1).random(shape)
    inner = np.maximum(1.0 - 2.0 * np.abs(u - 0.5), np.finfo(np.float64).tiny)
    errors = -b * np.sign(u - 0.5) * np.log(inner)
    return ErrorSample(errors=errors, scale_field=b)
