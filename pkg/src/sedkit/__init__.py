"""sedkit: joint disparity and uncertainty estimation at desk scale.

Differentiable soft histograms, a distribution-matching KL loss on top of
a Laplacian likelihood, a 190-parameter pixel-wise uncertainty head fed
by multi-resolution disparity disagreement, and the evaluation suite
(endpoint error, outlier rate, noise-prediction error, sparsification
AUC), all on a small float64 autodiff core.
"""

from .tensor import Tape, Tensor, backward, grad_check
from .hist import BinSpec, Histogram, batch_stats, make_centers, soft_histogram
from .loss import (InlierPolicy, LossConfig, combined_loss, inlier_mask,
                   kl_loss, laplacian_nll)
from .head import (PDV, UncertaintyHead, compute_pdv, head_forward, init_head,
                   load_head, save_head)
from .stereo_toy import (CostVolume, DisparityPyramid, build_cost_volume,
                         match_pyramid, soft_argmax, upsample_disparity)
from .synth import (ErrorSample, SyntheticScene, gen_laplace_errors,
                    gen_scene, gen_shift_scene)
from .metrics import EvalReport, ape, d1, epe, eval_report, roc_auc
from .estimator import PyramidBlockMatcher, UncertaintyRegressor
from .train import Adam, predict_log_noise, train_head
from .config import RunConfig, load_config, parse_config, worker_threads

__version__ = "0.1.0"

__all__ = [
    "Adam", "BinSpec", "CostVolume", "DisparityPyramid", "ErrorSample",
    "EvalReport", "Histogram", "InlierPolicy", "LossConfig", "PDV",
    "PyramidBlockMatcher", "RunConfig", "SyntheticScene", "Tape", "Tensor",
    "UncertaintyHead", "UncertaintyRegressor", "ape", "backward",
    "batch_stats", "build_cost_volume", "combined_loss", "compute_pdv",
    "d1", "epe", "eval_report", "gen_laplace_errors", "gen_scene",
    "gen_shift_scene", "grad_check", "head_forward", "init_head",
    "inlier_mask", "kl_loss", "laplacian_nll", "load_config", "load_head",
    "make_centers", "match_pyramid", "parse_config", "predict_log_noise",
    "roc_auc", "save_head", "soft_argmax", "soft_histogram", "train_head",
    "upsample_disparity", "worker_threads",
]
