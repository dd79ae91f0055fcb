"""Worker-lane control for the numba kernels.

Kernels partition work into a fixed number of chunks that does not depend on
the lane count, so outputs are identical for any ``workers`` setting.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import sys

# Only effective before numba is first imported: lets --workers exceed the core
# count and prefers a threading layer that tolerates concurrent callers.
if "numba" not in sys.modules:
    os.environ.setdefault("NUMBA_NUM_THREADS", str(max(os.cpu_count() or 1, 8)))
    os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp tbb workqueue")

import numba  # noqa: E402
import numpy as np  # noqa: E402

# Fixed partition count for chunked reductions and scatters.
CHUNKS = 64


def max_lanes() -> int:
    return int(numba.config.NUMBA_NUM_THREADS)


def default_workers() -> int:
    env = os.environ.get("HETEROBENCH_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@contextmanager
def lanes(workers: int):
    """Run numba parallel regions in this thread with ``workers`` lanes."""
    n = max(1, min(int(workers), max_lanes()))
    prev = numba.get_num_threads()
    numba.set_num_threads(n)
    try:
        yield n
    finally:
        numba.set_num_threads(prev)


def chunk_bounds(n: int, chunks: int = CHUNKS) -> np.ndarray:
    """Start offsets of ``chunks`` near-equal contiguous pieces of ``range(n)``."""
    chunks = max(1, min(chunks, n)) if n else 1
    return (np.arange(chunks + 1, dtype=np.int64) * n) // chunks
