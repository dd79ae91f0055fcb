"""Mandelbrot dwell images: per-pixel escape time and Mariani-Silver
border subdivision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

INTERIOR = -1
STANDARD_VIEW = (-2.5, 1.0, -1.0, 1.0)


@dataclass(frozen=True)
class DwellImage:
    dwell: np.ndarray   # (height, width) int32; INTERIOR for points that never escape
    max_iter: int
    pixels_iterated: int


@njit(inline="always", cache=True)
def _dwell(cx, cy, max_iter):
    zx = 0.0
    zy = 0.0
    for it in range(1, max_iter + 1):
        zx, zy = zx * zx - zy * zy + cx, 2.0 * zx * zy + cy
        if zx * zx + zy * zy > 4.0:
            return it
    return -1


def escape_dwell(c: complex, max_iter: int) -> int:
    """Iteration at which ``|z|^2 > 4`` first holds, or ``INTERIOR``."""
    return int(_dwell(c.real, c.imag, max_iter))


def _grid(view, width, height):
    xmin, xmax, ymin, ymax = view
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"view {view} has zero area")
    if width < 1 or height < 1:
        raise ValueError("image must be at least 1x1")
    xs = xmin + np.arange(width) * ((xmax - xmin) / width)
    ys = ymin + np.arange(height) * ((ymax - ymin) / height)
    return xs, ys


@njit(parallel=True, cache=True)
def _escape_kernel(xs, ys, max_iter):
    out = np.empty((ys.size, xs.size), dtype=np.int32)
    for r in prange(ys.size):
        for c in range(xs.size):
            out[r, c] = _dwell(xs[c], ys[r], max_iter)
    return out


def mandelbrot_escape(view=STANDARD_VIEW, width: int = 512, height: int = 512,
                      max_iter: int = 256) -> DwellImage:
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    xs, ys = _grid(view, width, height)
    return DwellImage(_escape_kernel(xs, ys, max_iter), max_iter, width * height)


@njit(inline="always", cache=True)
def _visit(dwell, done, xs, ys, r, c, max_iter):
    if done[r, c]:
        return 0
    dwell[r, c] = _dwell(xs[c], ys[r], max_iter)
    done[r, c] = True
    return 1


@njit(parallel=True, cache=True)
def _ms_wave(rects, dwell, done, xs, ys, max_iter, min_tile):
    """Process one generation of rectangles; returns (children, iterated)."""
    m = rects.shape[0]
    split = np.zeros(m, dtype=np.bool_)
    iterated = np.zeros(m, dtype=np.int64)
    for t in prange(m):
        x0, y0, w, h = rects[t, 0], rects[t, 1], rects[t, 2], rects[t, 3]
        cnt = 0
        if w <= min_tile or h <= min_tile:
            for r in range(y0, y0 + h):
                for c in range(x0, x0 + w):
                    cnt += _visit(dwell, done, xs, ys, r, c, max_iter)
            iterated[t] = cnt
            continue
        for c in range(x0, x0 + w):
            cnt += _visit(dwell, done, xs, ys, y0, c, max_iter)
            cnt += _visit(dwell, done, xs, ys, y0 + h - 1, c, max_iter)
        for r in range(y0 + 1, y0 + h - 1):
            cnt += _visit(dwell, done, xs, ys, r, x0, max_iter)
            cnt += _visit(dwell, done, xs, ys, r, x0 + w - 1, max_iter)
        iterated[t] = cnt
        ref = dwell[y0, x0]
        uniform = True
        for c in range(x0, x0 + w):
            if dwell[y0, c] != ref or dwell[y0 + h - 1, c] != ref:
                uniform = False
                break
        if uniform:
            for r in range(y0 + 1, y0 + h - 1):
                if dwell[r, x0] != ref or dwell[r, x0 + w - 1] != ref:
                    uniform = False
                    break
        if uniform:
            for r in range(y0 + 1, y0 + h - 1):
                for c in range(x0 + 1, x0 + w - 1):
                    dwell[r, c] = ref
                    done[r, c] = True
        else:
            split[t] = True
    nsplit = 0
    for t in range(m):
        if split[t]:
            nsplit += 1
    children = np.empty((4 * nsplit, 4), dtype=np.int64)
    k = 0
    for t in range(m):
        if split[t]:
            x0, y0, w, h = rects[t, 0], rects[t, 1], rects[t, 2], rects[t, 3]
            w1, h1 = w // 2, h // 2
            children[k] = (x0, y0, w1, h1)
            children[k + 1] = (x0 + w1, y0, w - w1, h1)
            children[k + 2] = (x0, y0 + h1, w1, h - h1)
            children[k + 3] = (x0 + w1, y0 + h1, w - w1, h - h1)
            k += 4
    return children, iterated.sum()


def mandelbrot_mariani_silver(view=STANDARD_VIEW, width: int = 512, height: int = 512,
                              max_iter: int = 256, min_tile: int = 16) -> DwellImage:
    """Border-tracing subdivision.

    A rectangle whose border has a single dwell value is filled with it
    without iterating the interior; otherwise it spawns four sub-rectangles.
    Each generation of sub-rectangles runs as one parallel wave. Rectangles
    with a side of at most ``min_tile`` pixels are iterated per pixel.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if min_tile < 2:
        raise ValueError("min_tile must be >= 2")
    xs, ys = _grid(view, width, height)
    dwell = np.empty((height, width), dtype=np.int32)
    done = np.zeros((height, width), dtype=np.bool_)
    rects = np.array([[0, 0, width, height]], dtype=np.int64)
    iterated = 0
    while rects.shape[0]:
        rects, cnt = _ms_wave(rects, dwell, done, xs, ys, max_iter, min_tile)
        iterated += int(cnt)
    return DwellImage(dwell, max_iter, iterated)


def agreement(a: DwellImage, b: DwellImage) -> float:
    """Fraction of pixels with equal dwell."""
    return float((a.dwell == b.dwell).mean())
