"""Basic parallel algorithms: GUPS, BFS, GEMM, Pathfinder and radix sort."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from heterobench._parallel import CHUNKS, chunk_bounds
from heterobench._rng import mix64

UNREACHABLE = -1


# --------------------------------------------------------------------------
# GUPS
# --------------------------------------------------------------------------

# Updates are applied in blocks to bound the bucket buffer.
GUPS_BLOCK = 1 << 20


def gups_table(table_log2: int) -> np.ndarray:
    return np.arange(1 << table_log2, dtype=np.uint64)


@njit(cache=True)
def _gups_value(key, i):
    return mix64(key + np.uint64(i))


@njit(parallel=True, cache=True)
def _gups_block(table, key, start, count, owner_shift, n_owners, bounds):
    nchunks = bounds.size - 1
    counts = np.zeros((n_owners, nchunks), dtype=np.int64)
    mask = np.uint64(table.size - 1)
    # phase 1: per-chunk histogram of destination owners
    for c in prange(nchunks):
        for i in range(start + bounds[c], start + bounds[c + 1]):
            r = _gups_value(key, i)
            counts[(r & mask) >> owner_shift, c] += 1
    # exclusive offsets in (owner, chunk) order
    offsets = np.empty((n_owners, nchunks), dtype=np.int64)
    owner_start = np.empty(n_owners + 1, dtype=np.int64)
    acc = 0
    for o in range(n_owners):
        owner_start[o] = acc
        for c in range(nchunks):
            offsets[o, c] = acc
            acc += counts[o, c]
    owner_start[n_owners] = acc
    buf = np.empty(count, dtype=np.uint64)
    # phase 2: scatter stream values into owner buckets
    for c in prange(nchunks):
        pos = offsets[:, c].copy()
        for i in range(start + bounds[c], start + bounds[c + 1]):
            r = _gups_value(key, i)
            o = (r & mask) >> owner_shift
            buf[pos[o]] = r
            pos[o] += 1
    # phase 3: each owner applies its bucket to its own table slice
    for o in prange(n_owners):
        for p in range(owner_start[o], owner_start[o + 1]):
            r = buf[p]
            table[r & mask] ^= r


def gups(table: np.ndarray, updates: int, seed: int) -> np.ndarray:
    """XOR ``updates`` pseudorandom values into ``table`` in place.

    Update ``i`` uses ``r = mix64(seed + i)`` and touches ``table[r mod size]``.
    The stream is bucketed by destination slice so no two lanes write the
    same word; the result does not depend on the lane count.
    """
    size = table.size
    if size & (size - 1):
        raise ValueError("table size must be a power of two")
    log2 = size.bit_length() - 1
    owners_log2 = min(6, log2)
    owner_shift = np.uint64(log2 - owners_log2)
    key = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    for start in range(0, updates, GUPS_BLOCK):
        count = min(GUPS_BLOCK, updates - start)
        _gups_block(table, key, start, count, owner_shift, 1 << owners_log2,
                    chunk_bounds(count))
    return table


@njit(cache=True)
def gups_reference(table, updates, seed):
    """Sequential replay of the update stream."""
    key = np.uint64(seed)
    mask = np.uint64(table.size - 1)
    for i in range(updates):
        r = _gups_value(key, i)
        table[r & mask] ^= r
    return table


# --------------------------------------------------------------------------
# BFS
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CsrGraph:
    n: int
    offsets: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        if self.offsets.size != self.n + 1 or self.offsets[0] != 0:
            raise ValueError("offsets must have length n+1 and start at 0")
        if self.offsets[-1] != self.edges.size:
            raise ValueError("offsets[n] must equal the edge count")
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n):
            raise ValueError("neighbor index out of range")

    @classmethod
    def from_edges(cls, n: int, src, dst) -> "CsrGraph":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        order = np.argsort(src, kind="stable")
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(n, offsets, dst[order].astype(np.int32))


def random_graph(n: int, degree: int, rng: np.random.Generator) -> CsrGraph:
    """Uniform random directed graph with ``degree`` out-edges per vertex."""
    offsets = np.arange(n + 1, dtype=np.int64) * degree
    edges = rng.integers(0, n, size=n * degree, dtype=np.int32)
    return CsrGraph(n, offsets, edges)


@njit(parallel=True, cache=True)
def _bfs_expand(offsets, edges, frontier, dist, level):
    for f in prange(frontier.size):
        v = frontier[f]
        for e in range(offsets[v], offsets[v + 1]):
            u = edges[e]
            if dist[u] == -1:
                # concurrent writers store the same value
                dist[u] = level + 1


@njit(parallel=True, cache=True)
def _collect_level(dist, level, bounds):
    nchunks = bounds.size - 1
    counts = np.zeros(nchunks + 1, dtype=np.int64)
    for c in prange(nchunks):
        k = 0
        for i in range(bounds[c], bounds[c + 1]):
            if dist[i] == level:
                k += 1
        counts[c + 1] = k
    for c in range(nchunks):
        counts[c + 1] += counts[c]
    out = np.empty(counts[nchunks], dtype=np.int64)
    for c in prange(nchunks):
        k = counts[c]
        for i in range(bounds[c], bounds[c + 1]):
            if dist[i] == level:
                out[k] = i
                k += 1
    return out


def bfs(graph: CsrGraph, source: int) -> np.ndarray:
    """Level-synchronous BFS; returns hop counts, ``UNREACHABLE`` elsewhere."""
    if not 0 <= source < graph.n:
        raise ValueError(f"source {source} out of range for {graph.n} vertices")
    dist = np.full(graph.n, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    bounds = chunk_bounds(graph.n)
    level = 0
    while frontier.size:
        _bfs_expand(graph.offsets, graph.edges, frontier, dist, level)
        level += 1
        frontier = _collect_level(dist, level, bounds)
    return dist


@njit(cache=True)
def _bfs_queue(offsets, edges, n, source):
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head, tail = 0, 1
    queue[0] = source
    dist[source] = 0
    while head < tail:
        v = queue[head]
        head += 1
        for e in range(offsets[v], offsets[v + 1]):
            u = edges[e]
            if dist[u] == -1:
                dist[u] = dist[v] + 1
                queue[tail] = u
                tail += 1
    return dist


def bfs_reference(graph: CsrGraph, source: int) -> np.ndarray:
    """Sequential FIFO-queue BFS."""
    return _bfs_queue(graph.offsets, graph.edges, graph.n, source)


# --------------------------------------------------------------------------
# GEMM
# --------------------------------------------------------------------------

GEMM_BLOCK = 64


@njit(parallel=True, cache=True)
def _gemm_kernel(a, b, c, alpha, beta, block):
    m, k = a.shape
    n = b.shape[1]
    nbi = (m + block - 1) // block
    for bi in prange(nbi):
        i0 = bi * block
        i1 = min(i0 + block, m)
        acc = np.zeros((i1 - i0, n), dtype=c.dtype)
        for p0 in range(0, k, block):
            p1 = min(p0 + block, k)
            for i in range(i0, i1):
                for p in range(p0, p1):
                    aip = a[i, p]
                    for j in range(n):
                        acc[i - i0, j] += aip * b[p, j]
        for i in range(i0, i1):
            for j in range(n):
                if beta == 0:
                    c[i, j] = alpha * acc[i - i0, j]
                else:
                    c[i, j] = alpha * acc[i - i0, j] + beta * c[i, j]


def _op(x: np.ndarray, transpose: bool) -> np.ndarray:
    # transposed operands are materialized row-major so the inner loop streams
    return np.ascontiguousarray(x.T) if transpose else np.ascontiguousarray(x)


def gemm(a: np.ndarray, b: np.ndarray, c: np.ndarray | None = None,
         alpha: float = 1.0, beta: float = 0.0,
         transpose_a: bool = False, transpose_b: bool = False) -> np.ndarray:
    """``C <- alpha * op(A) op(B) + beta * C``, blocked over rows of C.

    ``C`` is updated in place when given. Accumulation order is fixed by the
    block size, so results are bitwise reproducible for any lane count.
    """
    opa, opb = _op(a, transpose_a), _op(b, transpose_b)
    if opa.shape[1] != opb.shape[0]:
        raise ValueError(f"non-conformable: {opa.shape} x {opb.shape}")
    dtype = np.result_type(a.dtype, b.dtype)
    shape = (opa.shape[0], opb.shape[1])
    if c is None:
        c = np.zeros(shape, dtype=dtype)
        beta = 0.0
    elif c.shape != shape:
        raise ValueError(f"C has shape {c.shape}, expected {shape}")
    if dtype != c.dtype:
        raise ValueError("A, B and C must share a dtype")
    _gemm_kernel(opa.astype(dtype, copy=False), opb.astype(dtype, copy=False), c,
                 c.dtype.type(alpha), c.dtype.type(beta), GEMM_BLOCK)
    return c


@njit(cache=True)
def _triple_loop(a, b, ta, tb):
    m = a.shape[1] if ta else a.shape[0]
    k = a.shape[0] if ta else a.shape[1]
    n = b.shape[0] if tb else b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                x = a[p, i] if ta else a[i, p]
                y = b[j, p] if tb else b[p, j]
                s += float(x) * float(y)
            out[i, j] = s
    return out


def gemm_reference(a, b, c=None, alpha=1.0, beta=0.0, transpose_a=False, transpose_b=False):
    """Triple-loop product accumulated in float64."""
    out = alpha * _triple_loop(a, b, transpose_a, transpose_b)
    if c is not None and beta != 0:
        out += beta * c.astype(np.float64)
    return out


def relative_frobenius(x: np.ndarray, ref: np.ndarray) -> float:
    ref = ref.astype(np.float64)
    denom = np.linalg.norm(ref)
    err = np.linalg.norm(x.astype(np.float64) - ref)
    return float(err / denom) if denom else float(err)


# --------------------------------------------------------------------------
# Pathfinder
# --------------------------------------------------------------------------

@njit(parallel=True, cache=True, nogil=True)
def _pathfinder_kernel(cost):
    rows, cols = cost.shape
    prev = cost[0].astype(np.int64)
    nxt = np.empty(cols, dtype=np.int64)
    for i in range(1, rows):
        for j in prange(cols):
            best = prev[j]
            if j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
            if j < cols - 1 and prev[j + 1] < best:
                best = prev[j + 1]
            nxt[j] = cost[i, j] + best
        prev, nxt = nxt, prev
    return prev


@njit(cache=True, nogil=True)
def _pathfinder_serial(cost):
    rows, cols = cost.shape
    prev = cost[0].astype(np.int64)
    nxt = np.empty(cols, dtype=np.int64)
    for i in range(1, rows):
        for j in range(cols):
            best = prev[j]
            if j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
            if j < cols - 1 and prev[j + 1] < best:
                best = prev[j + 1]
            nxt[j] = cost[i, j] + best
        prev, nxt = nxt, prev
    return prev


def pathfinder(cost: np.ndarray, serial: bool = False) -> int:
    """Minimum top-to-bottom path cost moving to column j-1, j or j+1 per row."""
    cost = np.asarray(cost)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost map must be a non-empty 2-D grid")
    if (cost < 0).any():
        raise ValueError("costs must be non-negative")
    kernel = _pathfinder_serial if serial else _pathfinder_kernel
    return int(kernel(np.ascontiguousarray(cost, dtype=np.int32)).min())


def pathfinder_bruteforce(cost: np.ndarray) -> int:
    """Minimum over every explicit path; exponential, for tiny grids only."""
    rows, cols = cost.shape
    best = None

    def walk(i, j, total):
        nonlocal best
        total += int(cost[i, j])
        if i == rows - 1:
            best = total if best is None else min(best, total)
            return
        for dj in (-1, 0, 1):
            if 0 <= j + dj < cols:
                walk(i + 1, j + dj, total)

    for j in range(cols):
        walk(0, j, 0)
    return best


# --------------------------------------------------------------------------
# Radix sort
# --------------------------------------------------------------------------

RADIX_BITS = 8
RADIX_PASSES = 4


def float_to_key(x: np.ndarray) -> np.ndarray:
    """Order-preserving map from float32 to uint32 (IEEE total order)."""
    bits = np.ascontiguousarray(x, dtype=np.float32).view(np.uint32)
    neg = (bits >> np.uint32(31)).astype(bool)
    return np.where(neg, ~bits, bits | np.uint32(0x80000000)).astype(np.uint32)


def key_to_float(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.uint32)
    top = (k >> np.uint32(31)).astype(bool)
    bits = np.where(top, k & np.uint32(0x7FFFFFFF), ~k).astype(np.uint32)
    return bits.view(np.float32)


@njit(parallel=True, cache=True)
def _radix_pass(keys, vals, out_keys, out_vals, shift, bounds):
    nchunks = bounds.size - 1
    hist = np.zeros((256, nchunks), dtype=np.int64)
    for c in prange(nchunks):
        for i in range(bounds[c], bounds[c + 1]):
            hist[(keys[i] >> shift) & 0xFF, c] += 1
    acc = 0
    for d in range(256):
        for c in range(nchunks):
            t = hist[d, c]
            hist[d, c] = acc
            acc += t
    for c in prange(nchunks):
        pos = hist[:, c].copy()
        for i in range(bounds[c], bounds[c + 1]):
            d = (keys[i] >> shift) & 0xFF
            out_keys[pos[d]] = keys[i]
            out_vals[pos[d]] = vals[i]
            pos[d] += 1


def radix_sort_u32(keys: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable LSD radix sort of uint32 keys carrying uint32 payloads."""
    if keys.shape != values.shape:
        raise ValueError("keys and values must have equal length")
    k = np.ascontiguousarray(keys, dtype=np.uint32).copy()
    v = np.ascontiguousarray(values, dtype=np.uint32).copy()
    k2, v2 = np.empty_like(k), np.empty_like(v)
    bounds = chunk_bounds(k.size, CHUNKS)
    for p in range(RADIX_PASSES):
        _radix_pass(k, v, k2, v2, np.uint32(p * RADIX_BITS), bounds)
        k, k2 = k2, k
        v, v2 = v2, v
    return k, v


def radix_sort(keys: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable sort of (key, value) pairs; float32 keys go through ``float_to_key``."""
    keys = np.asarray(keys)
    if keys.dtype == np.float32:
        k, v = radix_sort_u32(float_to_key(keys), values)
        return key_to_float(k), v
    return radix_sort_u32(keys, values)


def sort_reference(keys: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable comparison sort; float keys ordered with -0.0 before +0.0."""
    keys = np.asarray(keys)
    if keys.dtype.kind == "f":
        order = np.lexsort((~np.signbit(keys), keys))
    else:
        order = np.argsort(keys, kind="stable")
    return keys[order], np.asarray(values)[order]
