"""Central finite differences for checking analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

STEP = 1e-5
RTOL = 1e-5
ATOL = 1e-8


def numerical_gradient(f: Callable[[], float], x: np.ndarray, h: float = STEP) -> np.ndarray:
    """d f / d x by central differences, perturbing ``x`` in place one element at a time."""
    grad = np.empty_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        out[i] = (fp - fm) / (2 * h)
    return grad


def gradient_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = ATOL) -> float:
    """Worst elementwise ``|a - n| / max(|a|, |n|)``, ignoring differences below ``atol``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {n.shape}")
    diff = np.abs(a - n)
    scale = np.maximum(np.abs(a), np.abs(n))
    rel = np.where(diff <= atol, 0.0, diff / np.where(scale > 0, scale, 1.0))
    return float(rel.max()) if rel.size else 0.0


def gradients_match(analytic, numeric, rtol: float = RTOL, atol: float = ATOL) -> bool:
    return gradient_error(analytic, numeric, atol) <= rtol
