"""Training objectives: Laplacian likelihood, histogram KL, and their
multi-resolution combination, plus inlier filtering of the supervised
pixels.

The likelihood term treats the predicted log-noise s as the log of a
Laplacian scale: each pixel contributes |error| * exp(-s) + s, so large
predicted noise attenuates the residual while the s term keeps the noise
from growing without bound. The KL term compares the soft histogram of
absolute errors with that of the predicted noise exp(s) over bins laid
out from the error batch, pulling the noise distribution toward the error
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .hist import (BinSpec, Histogram, batch_stats, default_lambda2,
                   make_centers, soft_histogram)

INLIER_KINDS = ("none", "fixed", "adaptive")
KL_DIRECTIONS = ("eps_ref", "sigma_ref")


@dataclass(frozen=True)
class InlierPolicy:
    """Which pixels back-propagate: all, |error| < fixed px, or
    |error| < mean + k * spread of the batch."""

    kind: str = "none"
    fixed_threshold: float = 5.0
    adaptive_k: float = 3.0

    def __post_init__(self):
        if self.kind not in INLIER_KINDS:
            raise ValueError(f"unknown inlier kind {self.kind!r}")
        if self.fixed_threshold <= 0:
            raise ValueError("fixed_threshold must be positive")
        if self.adaptive_k <= 0:
            raise ValueError("adaptive_k must be positive")


@dataclass(frozen=True)
class LossConfig:
    """Knobs of the combined loss; coefficients are ordered coarse to fine."""

    coefficients: tuple = (0.5, 0.5, 0.7, 1.0)
    bin_count: int = 11
    scale: str = "logarithmic"
    alpha_max: float = 10.0
    lambda1: float = 10.0
    lambda2: Optional[float] = None  # None: (min center gap)^2 / 4 per level
    kl_direction: str = "eps_ref"
    use_kl: bool = True

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.size == 0 or (c < 0).any() or not (c > 0).any():
            raise ValueError("coefficients must be nonnegative with at least one positive")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ValueError(f"unknown kl_direction {self.kl_direction!r}")


@dataclass
class LevelDiagnostics:
    level: int
    log_loss: float
    div_loss: float
    inlier_pct: float
    mu: float
    b: float


def _detached(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def _as_bool(mask, shape) -> np.ndarray:
    m = np.asarray(getattr(mask, "data", mask)).astype(bool)
    if m.shape != shape:
        raise ValueError(f"mask shape {m.shape} != map shape {shape}")
    return m


def laplacian_nll(d_hat, d, s, mask) -> Tensor:
    """Masked mean of |d_hat - d| * exp(-s) + s.

    With s fixed at 0 this is exactly the masked mean absolute error; the
    per-pixel optimum over s sits at s = log |error|.
    """
    dh = d_hat if isinstance(d_hat, Tensor) else Tensor(d_hat)
    dg = d if isinstance(d, Tensor) else Tensor(d)
    sn = s if isinstance(s, Tensor) else Tensor(s)
    if dh.shape != dg.shape or dh.shape != sn.shape:
        raise ValueError("laplacian_nll: shape mismatch")
    m = _as_bool(mask, dh.shape)
    idx = np.flatnonzero(m.reshape(-1))
    if idx.size == 0:
        raise ValueError("laplacian_nll: empty mask")
    err = T.absolute(T.sub(T.gather(dh, idx), T.gather(dg, idx)))
    s_sel = T.gather(sn, idx)
    return T.add(T.mean(T.div(err, T.exp(s_sel))), T.mean(s_sel))


def inlier_mask(abs_errors, valid, policy: InlierPolicy) -> tuple:
    """Boolean keep-mask and kept fraction under the given policy.

    Thresholding is done on detached values: the mask never carries
    gradient. The adaptive threshold is mean + k * spread computed from
    the valid pixels.
    """
    errs = _detached(abs_errors)
    v = _as_bool(valid, errs.shape)
    n_valid = int(v.sum())
    if n_valid == 0:
        raise ValueError("inlier_mask: no valid pixels")
    if policy.kind == "none":
        return v.copy(), 1.0
    if policy.kind == "fixed":
        thr = policy.fixed_threshold
    else:
        mu, b = batch_stats(errs, v)
        thr = mu + policy.adaptive_k * b
    kept = v & (errs < thr)
    return kept, float(kept.sum()) / n_valid


def kl_loss(h_ref: Histogram, h_other: Histogram) -> Tensor:
    """Discrete KL divergence sum_j ref_j * ln(ref_j / other_j).

    Nonnegative, zero iff the histograms agree; both must live on the
    same bin layout and soft histograms guarantee strictly positive mass,
    which is re-checked here before dividing.
    """
    if h_ref.spec != h_other.spec:
        raise ValueError("kl_loss: histograms use different bin layouts")
    if (h_ref.mass.data <= 0).any() or (h_other.mass.data <= 0).any():
        raise ValueError("kl_loss: zero histogram mass")
    ratio = T.div(h_ref.mass, h_other.mass)
    return T.sum_(T.mul(h_ref.mass, T.log(ratio)))


def combined_loss(pyramid, s_maps: Sequence, d_gt, valid, cfg: LossConfig,
                  policy: InlierPolicy,
                  bin_specs: Optional[Sequence[BinSpec]] = None) -> tuple:
    """Coefficient-weighted sum over levels of likelihood + KL terms.

    ``pyramid`` is either a DisparityPyramid or a sequence of K full
    resolution disparity maps; ``s_maps`` are the K log-noise maps. Per
    level: absolute errors against ``d_gt`` on ``valid`` pixels, inlier
    filtering, bin layout from that level's masked errors (unless
    ``bin_specs`` pins the layout externally, e.g. for gradient checks),
    then the two loss terms. Levels with a zero coefficient contribute
    nothing to the total but still appear in the diagnostics.

    Returns (total loss tensor, list of LevelDiagnostics).
    """
    maps = getattr(pyramid, "full", pyramid)
    k_levels = len(maps)
    if len(s_maps) != k_levels:
        raise ValueError(f"{len(s_maps)} log-noise maps for {k_levels} disparity maps")
    if len(cfg.coefficients) != k_levels:
        raise ValueError(f"{len(cfg.coefficients)} coefficients for {k_levels} levels")
    if bin_specs is not None and len(bin_specs) != k_levels:
        raise ValueError("bin_specs must match the number of levels")

    gt = d_gt if isinstance(d_gt, Tensor) else Tensor(d_gt)
    total = None
    diags = []
    for k in range(k_levels):
        dh = maps[k] if isinstance(maps[k], Tensor) else Tensor(maps[k])
        sk = s_maps[k] if isinstance(s_maps[k], Tensor) else Tensor(s_maps[k])
        eps = T.absolute(T.sub(dh, gt))
        mask_k, pct = inlier_mask(eps.data, valid, policy)
        if not mask_k.any():
            raise ValueError(f"level {k}: inlier mask is empty")

        l_log = laplacian_nll(dh, gt, sk, mask_k)
        mu, b = batch_stats(eps.data, mask_k)
        if bin_specs is None:
            spec = make_centers(mu, b, cfg.bin_count, cfg.scale, cfg.alpha_max)
        else:
            spec = bin_specs[k]
        lam2 = cfg.lambda2 if cfg.lambda2 is not None else default_lambda2(spec)

        if cfg.use_kl:
            h_eps = soft_histogram(eps, mask_k, spec, cfg.lambda1, lam2)
            h_sig = soft_histogram(T.exp(sk), mask_k, spec, cfg.lambda1, lam2)
            if cfg.kl_direction == "eps_ref":
                l_div = kl_loss(h_eps, h_sig)
            else:
                l_div = kl_loss(h_sig, h_eps)
        else:
            l_div = Tensor(0.0)

        diags.append(LevelDiagnostics(level=k, log_loss=l_log.item(),
                                      div_loss=l_div.item(), inlier_pct=pct,
                                      mu=mu, b=b))
        c = float(cfg.coefficients[k])
        if c > 0:
            term = T.mul(T.add(l_log, l_div), c)
            total = term if total is None else T.add(total, term)
    return total, diags
