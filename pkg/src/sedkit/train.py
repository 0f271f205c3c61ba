"""Gradient-descent training of the uncertainty head.

The matcher is frozen, so the disparity maps and their pairwise
differences are constants; the only trainable state is the head's 190
parameters. Each step rebuilds a fresh tape, runs the head and the
combined loss, back-propagates, and applies an Adam update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import Tape, Tensor
from .head import UncertaintyHead, compute_pdv, head_forward, head_params
from .loss import InlierPolicy, LossConfig, combined_loss


@dataclass
class Adam:
    """Adam with the usual beta1 = 0.9, beta2 = 0.999 moment decay."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: list = field(default_factory=list)
    _v: list = field(default_factory=list)
    _t: int = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """Update ``params`` in place."""
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        b1t = 1 - self.beta1 ** self._t
        b2t = 1 - self.beta2 ** self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class StepRecord:
    step: int
    level: int
    log_loss: float
    div_loss: float
    inlier_pct: float
    mu: float
    b: float


def train_head(maps, d_gt, valid, head: UncertaintyHead, cfg: LossConfig,
               policy: InlierPolicy, lr: float = 0.01, steps: int = 200,
               record_every: int = 1) -> list:
    """Train ``head`` in place on one scene; returns per-step diagnostics.

    ``maps`` are the K full-resolution disparity maps (arrays or a
    DisparityPyramid). Diagnostics rows are one per (recorded step,
    level) in the loss module's CSV column order.
    """
    full = getattr(maps, "full", maps)
    consts = [m if isinstance(m, Tensor) else Tensor(m) for m in full]
    gt = d_gt if isinstance(d_gt, Tensor) else Tensor(d_gt)
    pdv = compute_pdv(consts)
    opt = Adam(lr=lr)
    history: list[StepRecord] = []
    for step in range(steps):
        tape = Tape()
        params = head_params(head, tape)
        s_maps = head_forward(head, pdv, params=params)
        total, diags = combined_loss(consts, s_maps, gt, valid, cfg, policy)
        T.backward(total)
        flat_params = [p for pair in zip(head.weights, head.biases) for p in pair]
        flat_grads = []
        for w_t, b_t in params:
            flat_grads.append(w_t.grad if w_t.grad is not None else np.zeros(w_t.shape))
            flat_grads.append(b_t.grad if b_t.grad is not None else np.zeros(b_t.shape))
        opt.step(flat_params, flat_grads)
        if step % record_every == 0 or step == steps - 1:
            for d in diags:
                history.append(StepRecord(step=step, level=d.level,
                                          log_loss=d.log_loss, div_loss=d.div_loss,
                                          inlier_pct=d.inlier_pct, mu=d.mu, b=d.b))
    return history


def predict_log_noise(head: UncertaintyHead, maps) -> list:
    """Forward pass only: K log-noise maps as plain arrays."""
    full = getattr(maps, "full", maps)
    consts = [m if isinstance(m, Tensor) else Tensor(m) for m in full]
    pdv = compute_pdv(consts)
    return [s.data.copy() for s in head_forward(head, pdv)]
