"""Desk-scale stereo matcher: image pyramid, correlation cost volumes,
soft-argmax disparity, and upsampling back to full resolution.

Matching is training-free on purpose. Costs are zero-mean normalized
cross-correlation over a square window, so the only thing learned
anywhere in this package is the uncertainty head. Candidate d at pixel
(x, y) compares the left window at x with the right window at x - d;
candidates that would read left of the image get the worst possible
correlation, -1, so the soft-argmax stays well defined everywhere.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .config import worker_threads

NCC_DENOM_FLOOR = 1e-8
PYRAMID_SCALES = (0.125, 0.25, 0.5, 1.0)


@dataclass
class CostVolume:
    """(H, W, D+1) correlation scores in [-1, 1] at one pyramid level."""

    costs: np.ndarray
    level: int = 0

    @property
    def d_max(self) -> int:
        return self.costs.shape[2] - 1


@dataclass
class DisparityPyramid:
    """K per-level disparity maps plus their full-resolution versions.

    ``native[k]`` is in the pixel units of its own level; ``full[k]`` is
    bilinearly upsampled and multiplied by the scale ratio so the values
    are full-resolution disparities. Order is coarse to fine.
    """

    native: list
    full: list
    scales: tuple = PYRAMID_SCALES


def _check_image(img, name: str) -> np.ndarray:
    a = np.asarray(getattr(img, "data", img), dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D single-channel image")
    if not np.isfinite(a).all():
        raise ValueError(f"{name}: non-finite values")
    return a


def _box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over a (2r+1)^2 window at every pixel, reflect-padded."""
    if radius == 0:
        return a.copy()
    p = np.pad(a, radius, mode="reflect")
    c = np.cumsum(np.cumsum(p, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    w = 2 * radius + 1
    h, wdt = a.shape
    return (c[w:w + h, w:w + wdt] - c[:h, w:w + wdt]
            - c[w:w + h, :wdt] + c[:h, :wdt])


def build_cost_volume(left, right, d_max: int, window: int = 5,
                      level: int = 0) -> CostVolume:
    """Correlation volume over disparity candidates 0..d_max."""
    l_img = _check_image(left, "left")
    r_img = _check_image(right, "right")
    if l_img.shape != r_img.shape:
        raise ValueError("build_cost_volume: image shapes differ")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    h, w = l_img.shape
    if d_max >= w:
        raise ValueError(f"d_max {d_max} >= image width {w}")
    radius = window // 2
    n_win = float(window * window)

    l_sum = _box_sum(l_img, radius)
    l_sqsum = _box_sum(l_img * l_img, radius)
    l_var = np.maximum(l_sqsum - l_sum * l_sum / n_win, 0.0)
    costs = np.full((h, w, d_max + 1), -1.0)

    def one_candidate(d: int) -> None:
        shifted = np.empty_like(r_img)
        shifted[:, d:] = r_img[:, :w - d] if d else r_img
        if d:
            shifted[:, :d] = r_img[:, :1]  # edge fill; masked out below
        r_sum = _box_sum(shifted, radius)
        r_sqsum = _box_sum(shifted * shifted, radius)
        r_var = np.maximum(r_sqsum - r_sum * r_sum / n_win, 0.0)
        cross = _box_sum(l_img * shifted, radius) - l_sum * r_sum / n_win
        denom = np.maximum(np.sqrt(l_var * r_var), NCC_DENOM_FLOOR)
        ncc = np.clip(cross / denom, -1.0, 1.0)
        ncc[:, :d] = -1.0  # candidate reads outside the right image
        costs[:, :, d] = ncc

    n_workers = worker_threads()
    if n_workers == 1 or d_max == 0:
        for d in range(d_max + 1):
            one_candidate(d)
    else:
        # each candidate writes its own slice, so scheduling cannot
        # change the result
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(one_candidate, range(d_max + 1)))
    return CostVolume(costs=costs, level=level)


def soft_argmax(volume, temperature: float = 0.1) -> Tensor:
    """Expected disparity under softmax(costs / temperature) per pixel.

    Differentiable with respect to the costs; output lies in [0, d_max].
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    costs = volume.costs if isinstance(volume, CostVolume) else volume
    c = costs if isinstance(costs, Tensor) else Tensor(costs)
    if len(c.shape) != 3:
        raise ValueError("soft_argmax: expected an (H, W, D+1) volume")
    h, w, n_cand = c.shape
    flat = T.reshape(c, (h * w, n_cand))
    probs = T.softmax(T.mul(flat, 1.0 / temperature), axis=1)
    cand = np.arange(n_cand, dtype=np.float64).reshape(n_cand, 1)
    d = T.matmul(probs, Tensor(cand))
    return T.reshape(d, (h, w))


def _bilinear_axis_coords(n_out: int, n_in: int) -> tuple:
    """Align-corners sample coordinates: lower index, upper index, weight."""
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.clip(np.floor(pos).astype(int), 0, n_in - 1)
    hi = np.clip(lo + 1, 0, n_in - 1)
    return lo, hi, pos - lo


def upsample_disparity(disp_map, from_scale: float, to_scale: float) -> np.ndarray:
    """Bilinear upsample and rescale disparity values by the size ratio.

    Disparities are horizontal offsets in pixels, so doubling the image
    doubles the values too. The size ratio must be a power of two.
    """
    a = np.asarray(getattr(disp_map, "data", disp_map), dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("upsample_disparity: expected a 2-D map")
    if to_scale < from_scale:
        raise ValueError("to_scale must be >= from_scale")
    ratio = to_scale / from_scale
    log2r = np.log2(ratio)
    if abs(log2r - round(log2r)) > 1e-12:
        raise ValueError(f"scale ratio {ratio} is not a power of two")
    ratio = int(round(ratio))
    if ratio == 1:
        return a.copy()
    h, w = a.shape
    ylo, yhi, wy = _bilinear_axis_coords(h * ratio, h)
    xlo, xhi, wx = _bilinear_axis_coords(w * ratio, w)
    wy = wy[:, None]
    wx = wx[None, :]
    top = a[ylo][:, xlo] * (1 - wx) + a[ylo][:, xhi] * wx
    bot = a[yhi][:, xlo] * (1 - wx) + a[yhi][:, xhi] * wx
    return (top * (1 - wy) + bot * wy) * ratio


def _avg_pool2(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    return a.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def match_pyramid(left, right, d_max: int = 32, window: int = 5,
                  temperature: float = 0.1) -> DisparityPyramid:
    """Full matching pass: 4-level pyramid, per-level volume + soft-argmax,
    then upsampling of every level to full resolution."""
    l_img = _check_image(left, "left")
    r_img = _check_image(right, "right")
    if l_img.shape != r_img.shape:
        raise ValueError("match_pyramid: image shapes differ")
    h, w = l_img.shape
    if h < 8 or w < 8:
        raise ValueError("match_pyramid: image smaller than 8x8")
    if h % 8 or w % 8:
        raise ValueError("match_pyramid: image dimensions must be multiples of 8")

    imgs = {1.0: (l_img, r_img)}
    for s in (0.5, 0.25, 0.125):
        prev_l, prev_r = imgs[s * 2]
        imgs[s] = (_avg_pool2(prev_l), _avg_pool2(prev_r))

    native, full = [], []
    for level, s in enumerate(PYRAMID_SCALES):
        lv_l, lv_r = imgs[s]
        lv_dmax = max(1, int(round(d_max * s)))
        lv_dmax = min(lv_dmax, lv_l.shape[1] - 1)
        vol = build_cost_volume(lv_l, lv_r, lv_dmax, window, level=level)
        disp = soft_argmax(vol, temperature).data
        native.append(disp)
        full.append(upsample_disparity(disp, s, 1.0))
    return DisparityPyramid(native=native, full=full, scales=PYRAMID_SCALES)
