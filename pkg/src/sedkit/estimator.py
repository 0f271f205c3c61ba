"""Scikit-learn style wrappers so the pipeline composes with the wider
ecosystem: a transformer that turns a stereo pair into multi-resolution
disparity maps, and a regressor that fits the uncertainty head on them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .head import init_head
from .loss import InlierPolicy, LossConfig
from .stereo_toy import match_pyramid
from .train import predict_log_noise, train_head
from .validation import check_image_pair, check_map, check_map_stack, check_mask


class PyramidBlockMatcher(BaseEstimator, TransformerMixin):
    """Training-free correlation matcher exposed as a transformer.

    ``transform`` maps a stereo pair, given as ``(left, right)`` or a
    stacked (2, H, W) array, to the (K, H, W) stack of full-resolution
    disparity maps, coarse level first.
    """

    def __init__(self, d_max=32, window=5, temperature=0.1):
        self.d_max = d_max
        self.window = window
        self.temperature = temperature

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        left, right = check_image_pair(X)
        pyr = match_pyramid(left, right, d_max=self.d_max, window=self.window,
                            temperature=self.temperature)
        return np.stack(pyr.full, axis=0)

    def match(self, left, right):
        """Full pyramid object, for callers that want the native levels too."""
        return match_pyramid(left, right, d_max=self.d_max, window=self.window,
                             temperature=self.temperature)


class UncertaintyRegressor(BaseEstimator):
    """Fits the pixel-wise log-noise head against ground-truth disparity.

    X is a (K, H, W) stack of full-resolution disparity maps (one per
    pyramid level, coarse first), y the (H, W) ground truth. ``predict``
    returns the finest level's noise scale sigma = exp(log-noise).
    """

    def __init__(self, bin_count=11, scale="logarithmic", alpha_max=10.0,
                 lambda1=10.0, lambda2=None, inlier="adaptive",
                 fixed_threshold=5.0, adaptive_k=3.0,
                 coefficients=(0.5, 0.5, 0.7, 1.0), kl_direction="eps_ref",
                 use_kl=True, learning_rate=0.01, steps=200, seed=0):
        self.bin_count = bin_count
        self.scale = scale
        self.alpha_max = alpha_max
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.inlier = inlier
        self.fixed_threshold = fixed_threshold
        self.adaptive_k = adaptive_k
        self.coefficients = coefficients
        self.kl_direction = kl_direction
        self.use_kl = use_kl
        self.learning_rate = learning_rate
        self.steps = steps
        self.seed = seed

    def _loss_config(self):
        return LossConfig(coefficients=tuple(self.coefficients),
                          bin_count=self.bin_count, scale=self.scale,
                          alpha_max=self.alpha_max, lambda1=self.lambda1,
                          lambda2=self.lambda2, kl_direction=self.kl_direction,
                          use_kl=self.use_kl)

    def _policy(self):
        return InlierPolicy(kind=self.inlier, fixed_threshold=self.fixed_threshold,
                            adaptive_k=self.adaptive_k)

    def fit(self, X, y, valid=None):
        maps = check_map_stack(X, "X")
        gt = check_map(y, "y")
        if maps.shape[1:] != gt.shape:
            raise ValueError(f"X maps {maps.shape[1:]} do not match y {gt.shape}")
        mask = check_mask(valid, gt.shape)
        k = maps.shape[0]
        if len(self.coefficients) != k:
            raise ValueError(f"{len(self.coefficients)} coefficients for {k} levels")
        sizes = (k * (k - 1) // 2, 8, 10, k)
        head = init_head(self.seed, layer_sizes=sizes)
        self.diagnostics_ = train_head(list(maps), gt, mask, head,
                                       self._loss_config(), self._policy(),
                                       lr=self.learning_rate, steps=self.steps)
        self.head_ = head
        self.n_levels_ = k
        return self

    def _check_fitted(self):
        if not hasattr(self, "head_"):
            raise NotFittedError("UncertaintyRegressor is not fitted yet")

    def predict_log_noise(self, X):
        """(K, H, W) stack of log-noise maps."""
        self._check_fitted()
        maps = check_map_stack(X, "X")
        if maps.shape[0] != self.n_levels_:
            raise ValueError(f"expected {self.n_levels_} levels, got {maps.shape[0]}")
        return np.stack(predict_log_noise(self.head_, list(maps)), axis=0)

    def predict(self, X):
        """Finest-level predicted noise scale sigma, shape (H, W)."""
        return np.exp(self.predict_log_noise(X)[-1])
