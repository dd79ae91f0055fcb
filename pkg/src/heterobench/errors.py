"""Exceptions shared by kernels and the harness."""


class VerificationError(RuntimeError):
    """A kernel's output disagrees with its oracle."""


class ResourceExhaustedError(MemoryError):
    """Requested problem size does not fit in available memory."""
