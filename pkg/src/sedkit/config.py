"""Flat key = value run configuration and the worker-thread cap.

Everything tunable in an experiment is a scalar, so the config format is
one ``key = value`` per line, blank lines and ``#`` comments allowed.
Unknown keys are an error; every key has a default. The special value
``auto`` for lambda2 defers to the per-level kernel-width heuristic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Optional

from .loss import INLIER_KINDS, KL_DIRECTIONS
from .hist import SCALES

D1_MODES = ("paper_or", "kitti_and")


@dataclass
class RunConfig:
    seed: int = 0
    width: int = 64
    height: int = 64
    d_max: int = 32
    window: int = 5
    temperature: float = 0.1
    bin_count: int = 11
    scale: str = "logarithmic"
    alpha_max: float = 10.0
    lambda1: float = 10.0
    lambda2: Optional[float] = None
    inlier: str = "adaptive"
    fixed_threshold: float = 5.0
    adaptive_k: float = 3.0
    coefficients: tuple = (0.5, 0.5, 0.7, 1.0)
    kl_direction: str = "eps_ref"
    use_kl: bool = True
    learning_rate: float = 0.01
    epochs: int = 200
    roc_steps: int = 20
    d1_mode: str = "paper_or"

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValueError(f"unknown scale {self.scale!r}")
        if self.inlier not in INLIER_KINDS:
            raise ValueError(f"unknown inlier policy {self.inlier!r}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ValueError(f"unknown kl_direction {self.kl_direction!r}")
        if self.d1_mode not in D1_MODES:
            raise ValueError(f"unknown d1_mode {self.d1_mode!r}")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "lambda2" and v is None:
                v = "auto"
            elif f.name == "coefficients":
                v = ",".join(repr(float(c)) for c in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _parse_value(name: str, raw: str):
    if name == "lambda2":
        return None if raw == "auto" else float(raw)
    if name == "coefficients":
        parts = [p for p in raw.split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if name == "use_kl":
        if raw not in ("true", "false"):
            raise ValueError(f"use_kl must be true or false, got {raw!r}")
        return raw == "true"
    if name in ("seed", "width", "height", "d_max", "window", "bin_count",
                "epochs", "roc_steps"):
        return int(raw)
    if name in ("temperature", "alpha_max", "lambda1", "fixed_threshold",
                "adaptive_k", "learning_rate"):
        return float(raw)
    return raw  # scale, inlier, kl_direction, d1_mode; validated in __post_init__


def parse_config(text: str) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def worker_threads() -> int:
    """Worker-thread cap from SEDKIT_THREADS; defaults to 1.

    Results are required to be identical at any setting; the cap only
    bounds parallelism over independent work items.
    """
    raw = os.environ.get("SEDKIT_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError as e:
        raise ValueError(f"SEDKIT_THREADS must be an integer, got {raw!r}") from e
    if n < 1:
        raise ValueError("SEDKIT_THREADS must be >= 1")
    return n
