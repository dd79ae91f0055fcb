"""Application kernels."""
