"""Portable benchmark suite: microbenchmarks, parallel primitives,
application kernels and DNN layer kernels behind one timing harness."""

__version__ = "0.1.0"

from heterobench import _parallel  # noqa: E402,F401  (configures numba first)
