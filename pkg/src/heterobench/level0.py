"""Microbenchmarks: buffer copy bandwidth, memory-hierarchy bandwidth and
peak arithmetic throughput."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit, prange

from heterobench._parallel import max_lanes
from heterobench.errors import VerificationError  # noqa: F401

KIB = 1024
COPY_REPS = 16


@dataclass(frozen=True)
class BandwidthSweepResult:
    points: tuple[tuple[int, float], ...]   # (bytes, GB/s)

    def __post_init__(self):
        sizes = [b for b, _ in self.points]
        if any(b2 <= b1 for b1, b2 in zip(sizes, sizes[1:])):
            raise ValueError("sweep sizes must be strictly increasing")
        if any(not g > 0 for _, g in self.points):
            raise ValueError("throughput must be positive")

    @property
    def sizes(self) -> list[int]:
        return [b for b, _ in self.points]

    @property
    def peak(self) -> float:
        return max(g for _, g in self.points)


def default_copy_sizes(max_kb: int = 500) -> list[int]:
    """1 KiB doubling up to ``max_kb``, plus the ``max_kb`` endpoint."""
    sizes, kb = [], 1
    while kb < max_kb:
        sizes.append(kb * KIB)
        kb *= 2
    sizes.append(max_kb * KIB)
    return sizes


class CopyBuffers:
    """Two preallocated regions standing in for host and device memory."""

    def __init__(self, max_bytes: int, rng: np.random.Generator):
        self.a = rng.integers(0, 256, size=max_bytes, dtype=np.uint8)
        self.b = np.zeros(max_bytes, dtype=np.uint8)
        self.b[::2] = 0xFF


def copy_bandwidth(direction: str, sizes: list[int], buffers: CopyBuffers | None = None,
                   reps: int = COPY_REPS) -> BandwidthSweepResult:
    """Median-of-``reps`` copy throughput per size, then verify byte equality."""
    if direction not in ("a_to_b", "b_to_a"):
        raise ValueError(f"unknown direction {direction!r}")
    if not sizes:
        raise ValueError("at least one size is required")
    if min(sizes) < KIB:
        raise ValueError("sizes start at 1 KiB")
    if buffers is None:
        buffers = CopyBuffers(max(sizes), np.random.default_rng(0))
    if max(sizes) > buffers.a.size:
        raise ValueError("size exceeds the preallocated buffers")
    src, dst = (buffers.a, buffers.b) if direction == "a_to_b" else (buffers.b, buffers.a)
    points = []
    for size in sizes:
        s, d = src[:size], dst[:size]
        # batch small copies so each timed sample spans well above timer resolution
        inner = max(1, (256 * KIB) // size)
        samples = []
        np.copyto(d, s)
        for _ in range(reps):
            t0 = time.perf_counter()
            for _ in range(inner):
                np.copyto(d, s)
            samples.append((time.perf_counter() - t0) / inner)
        if not np.array_equal(s, d):
            raise VerificationError(f"copy of {size} bytes does not match its source")
        points.append((size, size / float(np.median(samples)) / 1e9))
    return BandwidthSweepResult(tuple(points))


def last_level_cache_bytes() -> int:
    """Largest cache reported by sysfs; 8 MiB when unavailable."""
    best = 0
    for idx in Path("/sys/devices/system/cpu/cpu0/cache").glob("index*"):
        try:
            text = (idx / "size").read_text().strip()
        except OSError:
            continue
        mult = {"K": KIB, "M": KIB * KIB, "G": KIB ** 3}.get(text[-1:], 1)
        digits = text.rstrip("KMG")
        if digits.isdigit():
            best = max(best, int(digits) * mult)
    return best or 8 * KIB * KIB


def default_working_sets(max_bytes: int) -> list[int]:
    sets, ws = [], 16 * KIB
    while ws < max_bytes:
        sets.append(ws)
        ws *= 4
    sets.append(max_bytes)
    return sets


@njit(parallel=True, cache=True)
def _read(a, reps, bounds):
    nchunks = bounds.size - 1
    part = np.zeros(nchunks)
    for c in prange(nchunks):
        s = 0.0
        for _ in range(reps):
            for i in range(bounds[c], bounds[c + 1]):
                s += a[i]
        part[c] = s
    return part


@njit(parallel=True, cache=True)
def _write(a, reps, value, bounds):
    nchunks = bounds.size - 1
    for c in prange(nchunks):
        for r in range(reps):
            for i in range(bounds[c], bounds[c + 1]):
                a[i] = value + r


@njit(parallel=True, cache=True)
def _triad(a, b, c_, scalar, reps, bounds):
    nchunks = bounds.size - 1
    for c in prange(nchunks):
        for _ in range(reps):
            for i in range(bounds[c], bounds[c + 1]):
                a[i] = b[i] + scalar * c_[i]


PATTERNS = {"read": (1, 8), "write": (1, 8), "triad": (3, 24)}   # arrays, bytes per element


def memory_hierarchy_bandwidth(working_sets: list[int], pattern: str = "triad",
                               workers: int = 1, scalar: float = 3.0,
                               min_bytes: int = 256 * KIB * KIB,
                               rng: np.random.Generator | None = None) -> BandwidthSweepResult:
    """Sustained GB/s per working set; each lane streams its own slice."""
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    rng = rng or np.random.default_rng(0)
    narrays, per_elem = PATTERNS[pattern]
    points = []
    for ws in working_sets:
        n = max(1, ws // (8 * narrays))
        lanes_ = max(1, min(workers, max_lanes(), n))
        bounds = (np.arange(lanes_ + 1, dtype=np.int64) * n) // lanes_
        reps = max(1, min_bytes // (n * per_elem))
        # small integers keep float sums exact in any order
        b = rng.integers(0, 16, size=n).astype(np.float64)
        if pattern == "read":
            _read(b, 1, bounds)
            t0 = time.perf_counter()
            part = _read(b, reps, bounds)
            dt = time.perf_counter() - t0
            if part.sum() != reps * b.sum():
                raise VerificationError("read checksum differs from sequential checksum")
        elif pattern == "write":
            _write(b, 1, 1.0, bounds)
            t0 = time.perf_counter()
            _write(b, reps, 1.0, bounds)
            dt = time.perf_counter() - t0
            if not (b == 1.0 + reps - 1).all():
                raise VerificationError("write pattern left unexpected values")
        else:
            a = np.empty(n)
            c = rng.integers(0, 16, size=n).astype(np.float64)
            _triad(a, b, c, scalar, 1, bounds)
            t0 = time.perf_counter()
            _triad(a, b, c, scalar, reps, bounds)
            dt = time.perf_counter() - t0
            verify_triad(a, b, c, scalar, rng)
        points.append((n * narrays * 8, n * per_elem * reps / dt / 1e9))
    return BandwidthSweepResult(tuple(points))


def triad(b: np.ndarray, c: np.ndarray, scalar: float, workers: int = 1) -> np.ndarray:
    a = np.empty_like(b)
    n = b.size
    lanes_ = max(1, min(workers, max_lanes(), n))
    _triad(a, b, c, scalar, 1, (np.arange(lanes_ + 1, dtype=np.int64) * n) // lanes_)
    return a


def verify_triad(a, b, c, scalar, rng: np.random.Generator, fraction: float = 0.01):
    """Recompute a random 1% sample of ``a = b + s*c`` sequentially."""
    k = max(1, int(a.size * fraction))
    for i in rng.choice(a.size, size=min(k, a.size), replace=False).tolist():
        if a[i] != b[i] + scalar * c[i]:
            raise VerificationError(f"triad mismatch at element {i}")


# --------------------------------------------------------------------------
# Peak arithmetic
# --------------------------------------------------------------------------

ACCUMULATORS = 64


@njit(inline="always", cache=True)
def f32bits_to_f16_bits(bits):
    """Round-to-nearest-even float32 bit pattern -> binary16 bit pattern."""
    b = np.int64(bits)
    sign = (b >> 16) & 0x8000
    exp = (b >> 23) & 0xFF
    mant = b & 0x7FFFFF
    if exp == 0xFF:
        return np.uint16(sign | 0x7C00 | (0x200 if mant else 0))
    e = exp - 127 + 15
    if e >= 0x1F:
        return np.uint16(sign | 0x7C00)
    if e <= 0:
        if e < -10:
            return np.uint16(sign)
        mant = mant | 0x800000
        shift = 14 - e
        half = np.int64(1) << (shift - 1)
        rest = mant & ((np.int64(1) << shift) - 1)
        m = mant >> shift
        if rest > half or (rest == half and (m & 1)):
            m += 1
        return np.uint16(sign | m)
    m = mant >> 13
    rest = mant & 0x1FFF
    out = sign | (e << 10) | m
    if rest > 0x1000 or (rest == 0x1000 and (m & 1)):
        out += 1   # carry may roll into the exponent, which is correct
    return np.uint16(out)


@njit(cache=True)
def f32_to_f16_bits(x):
    scratch = np.empty(1, dtype=np.float32)
    scratch[0] = x
    return f32bits_to_f16_bits(scratch.view(np.uint32)[0])


@njit(inline="always", cache=True)
def f16_bits_to_f32(h):
    h = np.int64(h)
    sign = -1.0 if h & 0x8000 else 1.0
    exp = (h >> 10) & 0x1F
    mant = h & 0x3FF
    if exp == 0:
        return np.float32(sign * mant * 2.0 ** -24)
    if exp == 0x1F:
        return np.float32(sign * np.inf) if mant == 0 else np.float32(np.nan)
    return np.float32(sign * (1.0 + mant / 1024.0) * 2.0 ** (exp - 15))


@njit(parallel=True, cache=True)
def _fma_chains(acc, mult, add, iters):
    lanes_, width = acc.shape
    for w in prange(lanes_):
        a = acc[w].copy()
        for _ in range(iters):
            for k in range(width):
                a[k] = a[k] * mult + add
        acc[w] = a


@njit(parallel=True, cache=True)
def _fma_chains_f16(acc, mult, add, iters):
    lanes_, width = acc.shape
    m = f16_bits_to_f32(f32_to_f16_bits(mult))
    ad = f16_bits_to_f32(f32_to_f16_bits(add))
    for w in prange(lanes_):
        scratch = np.empty(1, dtype=np.float32)
        view = scratch.view(np.uint32)
        for _ in range(iters):
            for k in range(width):
                scratch[0] = f16_bits_to_f32(acc[w, k]) * m + ad
                acc[w, k] = f32bits_to_f16_bits(view[0])


@dataclass(frozen=True)
class FlopsResult:
    gflops: float
    precision: str
    emulated: bool
    accumulators: np.ndarray


def max_flops(precision: str = "f32", workers: int = 1, iters: int = 50_000) -> FlopsResult:
    """Independent multiply-add chains per lane; GFLOPS = 2 * FMA count / time.

    binary16 has no portable native arithmetic here, so ``f16`` stores values
    as half-precision bit patterns and computes each step in float32.
    """
    if precision not in ("f16", "f32", "f64"):
        raise ValueError(f"unknown precision {precision!r}")
    lanes_ = max(1, min(workers, max_lanes()))
    emulated = precision == "f16"
    if emulated:
        seed = np.array([f32_to_f16_bits(np.float32(1.0 + k / ACCUMULATORS)) for k in range(ACCUMULATORS)],
                        dtype=np.uint16)
        acc = np.tile(seed, (lanes_, 1))
        kernel, mult, add = _fma_chains_f16, np.float32(0.5), np.float32(0.5)
        # the emulated path is ~100x slower per operation
        iters = max(1, iters // 100)
    else:
        dtype = np.float32 if precision == "f32" else np.float64
        acc = np.tile((1.0 + np.arange(ACCUMULATORS) / ACCUMULATORS).astype(dtype), (lanes_, 1))
        kernel, mult, add = _fma_chains, dtype(0.999), dtype(0.001)
    kernel(acc.copy(), mult, add, 1)
    t0 = time.perf_counter()
    kernel(acc, mult, add, iters)
    dt = time.perf_counter() - t0
    values = np.array([f16_bits_to_f32(v) for v in acc.ravel()]) if emulated else acc.ravel()
    if not (np.isfinite(values).all() and (values != 0).all()):
        raise VerificationError("accumulators must stay finite and nonzero")
    fmas = lanes_ * ACCUMULATORS * iters
    return FlopsResult(2.0 * fmas / dt / 1e9, precision, emulated, acc)
