"""Separable 2-D lifting wavelet transforms (reversible 5/3 and CDF 9/7).

Each level transforms every row of the current low-pass region, then every
column, leaving low-pass coefficients first and high-pass second along each
axis. Boundaries use whole-sample symmetric extension. The 9/7 lifting
constants are the published JPEG 2000 values.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

ALPHA = -1.586134342059924
BETA = -0.052980118572961
GAMMA = 0.882911075530934
DELTA = 0.443506852043971
KAPPA = 1.230174104914001

VARIANTS = ("int_5_3", "float_9_7")


@njit(cache=True)
def _fwd53(x, s, d):
    half = s.size
    for n in range(half):
        right = x[2 * n + 2] if n + 1 < half else x[2 * n]
        d[n] = x[2 * n + 1] - ((x[2 * n] + right) >> 1)
    for n in range(half):
        left = d[n - 1] if n > 0 else d[0]
        s[n] = x[2 * n] + ((left + d[n] + 2) >> 2)


@njit(cache=True)
def _inv53(s, d, x):
    half = s.size
    for n in range(half):
        left = d[n - 1] if n > 0 else d[0]
        x[2 * n] = s[n] - ((left + d[n] + 2) >> 2)
    for n in range(half):
        right = x[2 * n + 2] if n + 1 < half else x[2 * n]
        x[2 * n + 1] = d[n] + ((x[2 * n] + right) >> 1)


@njit(cache=True)
def _predict(s, d, coef):
    half = s.size
    for n in range(half):
        right = s[n + 1] if n + 1 < half else s[n]
        d[n] += coef * (s[n] + right)


@njit(cache=True)
def _update(s, d, coef):
    for n in range(s.size):
        left = d[n - 1] if n > 0 else d[0]
        s[n] += coef * (left + d[n])


@njit(cache=True)
def _fwd97(x, s, d):
    half = s.size
    for n in range(half):
        s[n] = x[2 * n]
        d[n] = x[2 * n + 1]
    _predict(s, d, ALPHA)
    _update(s, d, BETA)
    _predict(s, d, GAMMA)
    _update(s, d, DELTA)
    for n in range(half):
        s[n] /= KAPPA
        d[n] *= KAPPA


@njit(cache=True)
def _inv97(s, d, x):
    half = s.size
    for n in range(half):
        s[n] *= KAPPA
        d[n] /= KAPPA
    _update(s, d, -DELTA)
    _predict(s, d, -GAMMA)
    _update(s, d, -BETA)
    _predict(s, d, -ALPHA)
    for n in range(half):
        x[2 * n] = s[n]
        x[2 * n + 1] = d[n]


@njit(parallel=True, cache=True)
def _rows53(a, inverse):
    rows, cols = a.shape
    half = cols // 2
    for r in prange(rows):
        line = np.empty(cols, dtype=np.int64)
        s = np.empty(half, dtype=np.int64)
        d = np.empty(half, dtype=np.int64)
        if inverse:
            for n in range(half):
                s[n] = a[r, n]
                d[n] = a[r, half + n]
            _inv53(s, d, line)
            for c in range(cols):
                a[r, c] = line[c]
        else:
            for c in range(cols):
                line[c] = a[r, c]
            _fwd53(line, s, d)
            for n in range(half):
                a[r, n] = s[n]
                a[r, half + n] = d[n]


@njit(parallel=True, cache=True)
def _rows97(a, inverse):
    rows, cols = a.shape
    half = cols // 2
    for r in prange(rows):
        line = np.empty(cols)
        s = np.empty(half)
        d = np.empty(half)
        if inverse:
            for n in range(half):
                s[n] = a[r, n]
                d[n] = a[r, half + n]
            _inv97(s, d, line)
            for c in range(cols):
                a[r, c] = line[c]
        else:
            for c in range(cols):
                line[c] = a[r, c]
            _fwd97(line, s, d)
            for n in range(half):
                a[r, n] = s[n]
                a[r, half + n] = d[n]


def _pass(region: np.ndarray, inverse: bool, integer: bool, axis: int):
    # columns are handled as rows of a transposed copy
    work = np.ascontiguousarray(region if axis == 1 else region.T)
    (_rows53 if integer else _rows97)(work, inverse)
    region[...] = work if axis == 1 else work.T


def dwt2d(image: np.ndarray, variant: str = "int_5_3", direction: str = "forward",
          levels: int = 1) -> np.ndarray:
    """Multi-level 2-D transform; ``int_5_3`` works on int32, ``float_9_7`` on float32."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = image.shape
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(f"{h}x{w} image is not divisible by 2^{levels}")
    integer = variant == "int_5_3"
    out = np.array(image, dtype=np.int32 if integer else np.float32)
    if direction == "forward":
        for lvl in range(levels):
            region = out[: h >> lvl, : w >> lvl]
            _pass(region, False, integer, axis=1)
            _pass(region, False, integer, axis=0)
    else:
        for lvl in reversed(range(levels)):
            region = out[: h >> lvl, : w >> lvl]
            _pass(region, True, integer, axis=0)
            _pass(region, True, integer, axis=1)
    return out


def highpass_mask(shape: tuple[int, int], levels: int) -> np.ndarray:
    """True where a forward transform stores high-pass coefficients."""
    h, w = shape
    mask = np.ones(shape, dtype=bool)
    mask[: h >> levels, : w >> levels] = False
    return mask
