"""Finite-difference verification of every differentiable path.

Each check builds randomized instances, evaluates one scalar objective
through the op under test, and compares the tape's gradient against
central differences via :func:`sedkit.tensor.grad_check`. Instances are
constructed away from the known kinks: absolute errors are bounded away
from zero, and pre-activations of the pixel-wise MLP are kept off the
leaky-ReLU corner. For the combined loss the bin layout is pinned to the
unperturbed batch, matching its treat-centers-as-constants contract;
otherwise the differencing would pick up the (deliberately untracked)
drift of the layout itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor, grad_check
from .hist import batch_stats, make_centers, soft_histogram
from .loss import InlierPolicy, LossConfig, combined_loss, kl_loss, laplacian_nll
from .head import init_head, head_forward, PDV
from .stereo_toy import soft_argmax

TOL = 1e-4
H_STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    instances: int
    max_rel_err: float
    tol: float
    elapsed_s: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err < self.tol


def _unpack(x: Tensor, offset: int, shape) -> Tensor:
    n = int(np.prod(shape))
    return T.reshape(T.gather(x, np.arange(offset, offset + n)), shape)


def check_laplacian_nll(seed: int = 0, instances: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        h, w = rng.integers(2, 5, size=2)
        gt = rng.uniform(0, 10, size=(h, w))
        sign = rng.choice([-1.0, 1.0], size=(h, w))
        d_hat = gt + sign * rng.uniform(0.2, 2.0, size=(h, w))
        s = rng.uniform(-1, 1, size=(h, w))
        mask = rng.random((h, w)) < 0.8
        mask.flat[0] = True
        packed = np.stack([d_hat, s])

        def f(x):
            dh = _unpack(x, 0, (h, w))
            sv = _unpack(x, h * w, (h, w))
            return laplacian_nll(dh, Tensor(gt), sv, mask)

        worst = max(worst, grad_check(f, packed, h=H_STEP))
    return CheckResult("laplacian_nll", instances, worst, TOL,
                       time.perf_counter() - start)


def check_soft_histogram_kl(seed: int = 0, instances: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    spec = make_centers(1.0, 1.0, 11, "linear", 8.0)
    for i in range(instances):
        values = rng.uniform(0.1, 9.0, size=16)
        ref_vals = rng.uniform(0.1, 9.0, size=16)
        h_ref = soft_histogram(ref_vals, np.ones(16, dtype=bool), spec, 10.0, 1.0)
        flip = i % 2 == 1

        def f(x):
            hx = soft_histogram(x, np.ones(16, dtype=bool), spec, 10.0, 1.0)
            return kl_loss(hx, h_ref) if not flip else kl_loss(h_ref, hx)

        worst = max(worst, grad_check(f, values, h=H_STEP))
    return CheckResult("soft_histogram_kl", instances, worst, TOL,
                       time.perf_counter() - start)


def check_combined_loss(seed: int = 0, instances: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    k, h, w = 4, 3, 3
    # wide kernels keep the soft assignment far from saturation, where the
    # numeric side of the check would be all rounding noise
    cfg = LossConfig(scale="linear", alpha_max=6.0, lambda2=1.0)
    policy = InlierPolicy(kind="none")
    valid = np.ones((h, w), dtype=bool)
    for _ in range(instances):
        gt = rng.uniform(2, 10, size=(h, w))
        sign = rng.choice([-1.0, 1.0], size=(k, h, w))
        d_hat = gt[None] + sign * rng.uniform(0.2, 1.5, size=(k, h, w))
        s = rng.uniform(-0.5, 0.5, size=(k, h, w))
        specs = []
        for lvl in range(k):
            mu, b = batch_stats(np.abs(d_hat[lvl] - gt), valid)
            specs.append(make_centers(mu, b, cfg.bin_count, cfg.scale, cfg.alpha_max))
        packed = np.concatenate([d_hat.reshape(-1), s.reshape(-1)])

        def f(x):
            maps = [_unpack(x, lvl * h * w, (h, w)) for lvl in range(k)]
            s_maps = [_unpack(x, (k + lvl) * h * w, (h, w)) for lvl in range(k)]
            total, _ = combined_loss(maps, s_maps, Tensor(gt), valid, cfg,
                                     policy, bin_specs=specs)
            return total

        worst = max(worst, grad_check(f, packed, h=H_STEP))
    return CheckResult("combined_loss", instances, worst, TOL,
                       time.perf_counter() - start)


def check_head_forward(seed: int = 0, instances: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    h, w = 4, 4
    n = h * w
    done = 0
    while done < instances:
        head = init_head(int(rng.integers(1 << 30)))
        feats = rng.uniform(-2, 2, size=(n, 6))
        if _near_relu_corner(head, feats):
            continue  # resample: finite differences straddle the kink
        done += 1
        pdv = PDV(features=Tensor(feats), height=h, width=w,
                  pairs=((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)))
        packed = np.concatenate([a.reshape(-1)
                                 for pair in zip(head.weights, head.biases)
                                 for a in pair])
        shapes = [a.shape for pair in zip(head.weights, head.biases) for a in pair]

        def f(x):
            offset = 0
            tensors = []
            for shp in shapes:
                tensors.append(_unpack(x, offset, shp))
                offset += int(np.prod(shp))
            params = list(zip(tensors[0::2], tensors[1::2]))
            s_maps = head_forward(head, pdv, params=params)
            all_s = T.stack(s_maps, axis=0)
            return T.mean(T.mul(all_s, all_s))

        worst = max(worst, grad_check(f, packed, h=H_STEP))
    return CheckResult("head_forward", instances, worst, TOL,
                       time.perf_counter() - start)


def _near_relu_corner(head, feats, margin: float = 1e-3) -> bool:
    x = feats
    for i, (wt, bs) in enumerate(zip(head.weights, head.biases)):
        pre = x @ wt + bs
        if i < len(head.weights) - 1:
            if np.abs(pre).min() < margin:
                return True
            x = np.where(pre >= 0, pre, 0.01 * pre)
    return False


def check_soft_argmax(seed: int = 0, instances: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        costs = rng.uniform(-1, 1, size=(4, 4, 6))

        def f(x):
            d = soft_argmax(x, temperature=0.5)
            return T.mean(T.mul(d, d))

        worst = max(worst, grad_check(f, costs, h=H_STEP))
    return CheckResult("soft_argmax", instances, worst, TOL,
                       time.perf_counter() - start)


def run_all(seed: int = 0, instances: int = 20) -> list:
    return [
        check_laplacian_nll(seed, instances),
        check_soft_histogram_kl(seed + 1, instances),
        check_combined_loss(seed + 2, instances),
        check_head_forward(seed + 3, instances),
        check_soft_argmax(seed + 4, instances),
    ]
