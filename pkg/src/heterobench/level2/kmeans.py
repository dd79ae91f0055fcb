"""Lloyd's K-means with deterministic chunked mean reduction."""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from heterobench._parallel import chunk_bounds


@njit(parallel=True, cache=True)
def _assign(points, centers, labels):
    n, d = points.shape
    k = centers.shape[0]
    changed = np.zeros(n, dtype=np.bool_)
    for i in prange(n):
        best, best_j = np.inf, 0
        for j in range(k):
            s = 0.0
            for t in range(d):
                diff = points[i, t] - centers[j, t]
                s += diff * diff
            if s < best:
                best, best_j = s, j
        changed[i] = labels[i] != best_j
        labels[i] = best_j
    return changed.any()


@njit(parallel=True, cache=True)
def _update(points, labels, centers, bounds):
    n, d = points.shape
    k = centers.shape[0]
    nchunks = bounds.size - 1
    sums = np.zeros((nchunks, k, d))
    counts = np.zeros((nchunks, k), dtype=np.int64)
    for c in prange(nchunks):
        for i in range(bounds[c], bounds[c + 1]):
            j = labels[i]
            counts[c, j] += 1
            for t in range(d):
                sums[c, j, t] += points[i, t]
    new = centers.copy()
    for j in range(k):
        total = 0
        acc = np.zeros(d)
        for c in range(nchunks):
            total += counts[c, j]
            for t in range(d):
                acc[t] += sums[c, j, t]
        # empty clusters keep their previous center
        if total > 0:
            for t in range(d):
                new[j, t] = acc[t] / total
    return new


def initial_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """First ``k`` points after a seeded shuffle."""
    return points[rng.permutation(points.shape[0])[:k]].copy()


def wcss(points: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    return float(((points - centers[labels]) ** 2).sum())


def kmeans(points: np.ndarray, centers: np.ndarray, max_iters: int,
           history: list | None = None):
    """Returns ``(centers, labels, iterations_used)``.

    Stops once assignments or centers stop changing. When ``history`` is a
    list, the within-cluster sum of squares after each iteration is appended.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    k = centers.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    centers = np.array(centers, dtype=np.float64)
    labels = np.full(n, -1, dtype=np.int64)
    bounds = chunk_bounds(n)
    it = 0
    for it in range(1, max_iters + 1):
        changed = _assign(points, centers, labels)
        new = _update(points, labels, centers, bounds)
        if history is not None:
            history.append(wcss(points, new, labels))
        moved = not np.array_equal(new, centers)
        centers = new
        if not changed or not moved:
            break
    return centers, labels, it


def kmeans_reference(points: np.ndarray, centers: np.ndarray, max_iters: int):
    """Plain sequential Lloyd iteration with the same stopping rule."""
    points = np.asarray(points, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64)
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    it = 0
    for it in range(1, max_iters + 1):
        new_labels = np.concatenate([
            ((points[s:s + 4096, None, :] - centers[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
            for s in range(0, points.shape[0], 4096)])
        changed = not np.array_equal(new_labels, labels)
        labels = new_labels
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        moved = not np.array_equal(new, centers)
        centers = new
        if not changed or not moved:
            break
    return centers, labels, it
