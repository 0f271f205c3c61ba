"""Input validation helpers shared by the estimator API."""

from __future__ import annotations

import numpy as np


def check_map(x, name: str = "map") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name}: non-finite values")
    return a


def check_map_stack(x, name: str = "maps") -> np.ndarray:
    """Coerce to a finite 3-D (K, H, W) float64 array."""
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"{name}: expected a (K, H, W) array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name}: non-finite values")
    return a


def check_mask(mask, shape, name: str = "valid") -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    m = np.asarray(getattr(mask, "data", mask)).astype(bool)
    if m.shape != shape:
        raise ValueError(f"{name}: shape {m.shape} != expected {shape}")
    return m


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def check_image_pair(X) -> tuple:
    """Accept (left, right) or a stacked (2, H, W) array."""
    if isinstance(X, (tuple, list)):
        if len(X) != 2:
            raise ValueError("expected a (left, right) pair")
        left, right = X
    else:
        a = np.asarray(X, dtype=np.float64)
        if a.ndim != 3 or a.shape[0] != 2:
            raise ValueError(f"expected (2, H, W), got shape {a.shape}")
        left, right = a[0], a[1]
    left = check_map(left, "left")
    right = check_map(right, "right")
    check_same_shape(left, right, "image pair")
    return left, right
