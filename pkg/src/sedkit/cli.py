"""Command-line front end: synth, train, eval, hist, gradcheck.

Every run is reproducible from (config, seed): outputs are byte-identical
across repeats and across SEDKIT_THREADS settings. All tabular output is
CSV with a header row; AUC values are emitted both raw and times 100,
since published tables use the scaled convention.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checks import run_all
from .config import RunConfig, load_config
from .formats import csv_text, pfm_read, pfm_write, pgm_read, pgm_write, write_csv
from .head import init_head, load_head, save_head
from .hist import batch_stats, make_centers, soft_histogram, default_lambda2
from .loss import InlierPolicy, LossConfig, kl_loss
from .metrics import eval_report
from .stereo_toy import match_pyramid
from .synth import gen_scene, gen_shift_scene
from .train import predict_log_noise, train_head

REPORT_HEADER = ["epe", "d1", "ape_avg", "ape_median", "auc_optimal",
                 "auc_estimated", "auc_optimal_x100", "auc_estimated_x100",
                 "n_valid"]
DIAG_HEADER = ["step", "level", "L_log", "L_div", "pct", "mu", "b"]


def _report_row(rep) -> list:
    return [rep.epe, rep.d1, rep.ape_avg, rep.ape_median, rep.auc_optimal,
            rep.auc_estimated, 100.0 * rep.auc_optimal, 100.0 * rep.auc_estimated,
            rep.n_valid]


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.shift is not None:
        scene = gen_shift_scene(args.seed, args.width, args.height, args.shift)
    else:
        scene = gen_scene(args.seed, args.width, args.height, args.d_max,
                          sparsity=args.sparsity)
    pgm_write(out / "left.pgm", scene.left)
    pgm_write(out / "right.pgm", scene.right)
    pfm_write(out / "disp.pfm", scene.disparity.astype(np.float32))
    pgm_write(out / "valid.pgm", scene.valid.astype(np.uint8) * 255)
    print(f"wrote scene (seed {args.seed}) to {out}")
    return 0


def _loss_config(cfg: RunConfig) -> LossConfig:
    return LossConfig(coefficients=cfg.coefficients, bin_count=cfg.bin_count,
                      scale=cfg.scale, alpha_max=cfg.alpha_max,
                      lambda1=cfg.lambda1, lambda2=cfg.lambda2,
                      kl_direction=cfg.kl_direction, use_kl=cfg.use_kl)


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scene = gen_scene(cfg.seed, cfg.width, cfg.height, cfg.d_max)
    pyramid = match_pyramid(scene.left, scene.right, d_max=cfg.d_max,
                            window=cfg.window, temperature=cfg.temperature)
    head = load_head(args.init_head) if args.init_head else init_head(cfg.seed)
    policy = InlierPolicy(kind=cfg.inlier, fixed_threshold=cfg.fixed_threshold,
                          adaptive_k=cfg.adaptive_k)
    history = train_head(pyramid, scene.disparity, scene.valid, head,
                         _loss_config(cfg), policy, lr=cfg.learning_rate,
                         steps=cfg.epochs)

    save_head(out / "head.bin", head)
    write_csv(out / "diagnostics.csv", DIAG_HEADER,
              [[r.step, r.level, r.log_loss, r.div_loss, r.inlier_pct, r.mu, r.b]
               for r in history])

    s_maps = predict_log_noise(head, pyramid)
    sigma = np.exp(s_maps[-1])
    rep = eval_report(pyramid.full[-1], scene.disparity, sigma, scene.valid,
                      steps=cfg.roc_steps, d1_mode=cfg.d1_mode)
    write_csv(out / "report.csv", REPORT_HEADER, [_report_row(rep)])
    write_csv(out / "roc.csv", ["density", "mean_epe"],
              [[f, v] for f, v in rep.roc])
    print(f"trained {cfg.epochs} steps; report written to {out}")
    return 0


def cmd_eval(args) -> int:
    d_hat = pfm_read(args.dhat).samples.astype(np.float64)
    d_gt = pfm_read(args.gt).samples.astype(np.float64)
    sigma = pfm_read(args.sigma).samples.astype(np.float64)
    if d_hat.ndim != 2 or d_gt.ndim != 2 or sigma.ndim != 2:
        raise ValueError("eval expects single-channel PFM maps")
    if args.valid:
        valid = pgm_read(args.valid) > 0
    else:
        valid = np.ones_like(d_gt, dtype=bool)
    valid &= d_gt <= args.max_disp
    rep = eval_report(d_hat, d_gt, sigma, valid, steps=args.steps,
                      d1_mode=args.d1_mode)
    sys.stdout.write(csv_text(REPORT_HEADER, [_report_row(rep)]))
    return 0


def cmd_hist(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    stacks = []
    for path in args.values:
        samples = pfm_read(path).samples.astype(np.float64)
        stacks.append(np.abs(samples))
    mask0 = np.ones_like(stacks[0], dtype=bool)
    mu, b = batch_stats(stacks[0], mask0)
    spec = make_centers(mu, b, cfg.bin_count, cfg.scale, cfg.alpha_max)
    lam2 = cfg.lambda2 if cfg.lambda2 is not None else default_lambda2(spec)
    hists = [soft_histogram(v, np.ones_like(v, dtype=bool), spec, cfg.lambda1, lam2)
             for v in stacks]

    centers = spec.centers()
    rows = []
    for i, h in enumerate(hists):
        for j in range(spec.bin_count):
            bin_cols = [j, float(centers[j]), float(h.mass.data[j])]
            rows.append(bin_cols if len(hists) == 1 else [i] + bin_cols)
    header = ["bin_index", "center", "mass"]
    if len(hists) > 1:
        header = ["input"] + header
    sys.stdout.write(csv_text(header, rows))
    if len(hists) > 1:
        sys.stdout.write("\n")
        kl_rows = []
        for i, hi in enumerate(hists):
            for j, hj in enumerate(hists):
                if i != j:
                    kl_rows.append([i, j, kl_loss(hi, hj).item()])
        sys.stdout.write(csv_text(["ref", "other", "kl"], kl_rows))
    return 0


def cmd_gradcheck(args) -> int:
    results = run_all(seed=args.seed, instances=args.instances)
    all_ok = True
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name}: max rel err {r.max_rel_err:.3e} "
              f"(tol {r.tol:g}, {r.instances} instances, {r.elapsed_s:.2f}s)")
        all_ok &= r.ok
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sedkit",
                                description="toy joint disparity/uncertainty experiments")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="write a synthetic stereo scene")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out-dir", required=True)
    ps.add_argument("--width", type=int, default=64)
    ps.add_argument("--height", type=int, default=64)
    ps.add_argument("--d-max", type=int, default=16)
    ps.add_argument("--sparsity", type=float, default=0.0,
                    help="fraction of valid pixels to drop from the mask")
    ps.add_argument("--shift", type=int, default=None,
                    help="make a constant integer-shift pair instead")
    ps.set_defaults(func=cmd_synth)

    pt = sub.add_parser("train", help="run the toy experiment end to end")
    pt.add_argument("--config", default=None, help="key = value config file")
    pt.add_argument("--out-dir", required=True)
    pt.add_argument("--init-head", default=None,
                    help="warm-start from saved head weights instead of seed init")
    pt.set_defaults(func=cmd_train)

    pe = sub.add_parser("eval", help="evaluate PFM maps, CSV report on stdout")
    pe.add_argument("--dhat", required=True)
    pe.add_argument("--gt", required=True)
    pe.add_argument("--sigma", required=True)
    pe.add_argument("--valid", default=None, help="PGM mask, nonzero = valid")
    pe.add_argument("--steps", type=int, default=20)
    pe.add_argument("--d1-mode", choices=("paper_or", "kitti_and"), default="paper_or")
    pe.add_argument("--max-disp", type=float, default=192.0,
                    help="exclude pixels with ground truth above this")
    pe.set_defaults(func=cmd_eval)

    ph = sub.add_parser("hist", help="soft histograms and pairwise KL of PFM inputs")
    ph.add_argument("--values", nargs="+", required=True,
                    help="PFM files; bins come from the first one's statistics")
    ph.add_argument("--config", default=None)
    ph.set_defaults(func=cmd_hist)

    pg = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--instances", type=int, default=20)
    pg.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, ZeroDivisionError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
