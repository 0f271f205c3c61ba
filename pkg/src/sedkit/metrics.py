"""Disparity and uncertainty evaluation: endpoint error, outlier rate,
noise-prediction error, and density-vs-error sparsification curves.

The sparsification ("ROC") curve adds pixels in increasing order of a
ranking key and records the running mean absolute error at a grid of
density fractions. Ranking by the true error gives the lowest possible
curve (optimal); ranking by predicted uncertainty gives the estimated
one. Lower area under either curve is better, and optimal <= estimated
always.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

D1_ABS_PX = 3.0
D1_REL = 0.05


@dataclass
class EvalReport:
    epe: float
    d1: float
    ape_avg: float
    ape_median: float
    roc: list  # (density, cumulative mean abs error) pairs
    auc_optimal: float
    auc_estimated: float
    n_valid: int


def _arr(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def _valid_mask(valid, shape) -> np.ndarray:
    v = np.asarray(getattr(valid, "data", valid)).astype(bool)
    if v.shape != shape:
        raise ValueError(f"valid mask shape {v.shape} != {shape}")
    if not v.any():
        raise ValueError("no valid pixels")
    return v


def epe(d_hat, d_gt, valid) -> float:
    """Mean absolute disparity error over valid pixels."""
    dh, dg = _arr(d_hat), _arr(d_gt)
    if dh.shape != dg.shape:
        raise ValueError("epe: shape mismatch")
    v = _valid_mask(valid, dh.shape)
    return float(np.abs(dh - dg)[v].mean())


def d1(d_hat, d_gt, valid, mode: str = "paper_or") -> float:
    """Outlier fraction under a 3 px / 5 percent rule.

    ``paper_or`` flags |err| > 3 or (|err| >= 0.05 * |gt| and |err| > 0);
    the positivity guard keeps perfect pixels with zero ground truth from
    counting as outliers. ``kitti_and`` flags only pixels failing both
    the absolute and relative thresholds.
    """
    dh, dg = _arr(d_hat), _arr(d_gt)
    if dh.shape != dg.shape:
        raise ValueError("d1: shape mismatch")
    v = _valid_mask(valid, dh.shape)
    err = np.abs(dh - dg)[v]
    gt = np.abs(dg)[v]
    big_abs = err > D1_ABS_PX
    big_rel = err >= D1_REL * gt
    if mode == "paper_or":
        out = big_abs | (big_rel & (err > 0))
    elif mode == "kitti_and":
        out = big_abs & big_rel
    else:
        raise ValueError(f"unknown d1 mode {mode!r}")
    return float(out.mean())


def ape(abs_errors, sigma, valid) -> tuple:
    """Mean and median of | |err| - sigma | over valid pixels.

    The median of an even count is the lower middle element, which keeps
    the value an actual sample and the computation deterministic.
    """
    e, s = _arr(abs_errors), _arr(sigma)
    if e.shape != s.shape:
        raise ValueError("ape: shape mismatch")
    if (s < 0).any():
        raise ValueError("ape: sigma must be nonnegative")
    v = _valid_mask(valid, e.shape)
    diff = np.abs(np.abs(e) - s)[v]
    srt = np.sort(diff)
    median = float(srt[(diff.size - 1) // 2])
    return float(diff.mean()), median


def roc_auc(abs_errors, key, valid, steps: int = 20) -> tuple:
    """Sparsification curve and its trapezoidal area.

    Valid pixels are sorted ascending by ``key`` with a stable tie-break
    on flat (row-major) pixel index. For each density f = i/steps the
    curve records the mean |error| of the first ceil(f * n) pixels. The
    area integrates density from 0 to 1 with the curve extended flat from
    its first point down to density 0.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    e, k = _arr(abs_errors), _arr(key)
    if e.shape != k.shape:
        raise ValueError("roc_auc: shape mismatch")
    v = _valid_mask(valid, e.shape)
    errs = np.abs(e.reshape(-1)[v.reshape(-1)])
    keys = k.reshape(-1)[v.reshape(-1)]
    order = np.argsort(keys, kind="stable")
    sorted_errs = errs[order]
    prefix = np.cumsum(sorted_errs)
    n = errs.size

    curve = []
    for i in range(1, steps + 1):
        density = i / steps
        count = int(np.ceil(density * n))
        curve.append((density, float(prefix[count - 1] / count)))

    area = curve[0][1] * curve[0][0]  # flat extension to density 0
    for (f0, v0), (f1, v1) in zip(curve, curve[1:]):
        area += (f1 - f0) * (v0 + v1) / 2.0
    return curve, float(area)


def eval_report(d_hat, d_gt, sigma, valid, steps: int = 20,
                d1_mode: str = "paper_or") -> EvalReport:
    """Assemble every metric for one run; sigma is the predicted noise
    scale (exp of the log-noise output)."""
    dh, dg = _arr(d_hat), _arr(d_gt)
    v = _valid_mask(valid, dh.shape)
    abs_err = np.abs(dh - dg)
    ape_avg, ape_med = ape(abs_err, sigma, v)
    roc_est, auc_est = roc_auc(abs_err, sigma, v, steps)
    _, auc_opt = roc_auc(abs_err, abs_err, v, steps)
    return EvalReport(
        epe=epe(dh, dg, v),
        d1=d1(dh, dg, v, d1_mode),
        ape_avg=ape_avg,
        ape_median=ape_med,
        roc=roc_est,
        auc_optimal=auc_opt,
        auc_estimated=auc_est,
        n_valid=int(v.sum()),
    )
