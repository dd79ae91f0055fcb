"""DNN layer kernels, forward and backward.

Tensors are 4-D arrays in (batch, channel, height, width) order. Kernels run
in float32 or float64 depending on the input dtype. Every reduction runs in a
fixed order inside one lane, so results do not depend on the lane count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from heterobench._rng import counter_uniform, mix64
from heterobench.level1 import gemm


def _check4(x: np.ndarray, name: str = "input") -> np.ndarray:
    if x.ndim != 4:
        raise ValueError(f"{name} must be a 4-D (n, c, h, w) tensor, got shape {x.shape}")
    return np.ascontiguousarray(x)


def _same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


# --------------------------------------------------------------------------
# Activation (ReLU)
# --------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _relu_fwd(x, y):
    for i in prange(x.size):
        y[i] = x[i] if x[i] > 0 else 0


@njit(parallel=True, cache=True)
def _relu_bwd(x, dy, dx):
    for i in prange(x.size):
        dx[i] = dy[i] if x[i] > 0 else 0


def relu_forward(x: np.ndarray) -> np.ndarray:
    x = _check4(x)
    y = np.empty_like(x)
    _relu_fwd(x.ravel(), y.ravel())
    return y


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    x = _check4(x)
    _same_shape(x, dy)
    dx = np.empty_like(x)
    _relu_bwd(x.ravel(), np.ascontiguousarray(dy, dtype=x.dtype).ravel(), dx.ravel())
    return dx


# --------------------------------------------------------------------------
# Average pooling
# --------------------------------------------------------------------------

def pool_output_size(size: int, window: int, stride: int) -> int:
    span = size - window
    if window < 1 or stride < 1 or span < 0 or span % stride:
        raise ValueError(f"window {window} / stride {stride} do not tile a dimension of {size}")
    return span // stride + 1


@njit(parallel=True, cache=True)
def _avgpool_fwd(x, y, window, stride):
    n, c, oh, ow = y.shape
    scale = 1.0 / (window * window)
    for p in prange(n * c):
        b, ch = p // c, p % c
        for i in range(oh):
            for j in range(ow):
                s = 0.0
                for u in range(window):
                    for v in range(window):
                        s += x[b, ch, i * stride + u, j * stride + v]
                y[b, ch, i, j] = s * scale


@njit(parallel=True, cache=True)
def _avgpool_bwd(dy, dx, window, stride):
    n, c, oh, ow = dy.shape
    scale = 1.0 / (window * window)
    for p in prange(n * c):
        b, ch = p // c, p % c
        for i in range(oh):
            for j in range(ow):
                g = dy[b, ch, i, j] * scale
                for u in range(window):
                    for v in range(window):
                        dx[b, ch, i * stride + u, j * stride + v] += g


def avgpool_forward(x: np.ndarray, window: int = 2, stride: int | None = None) -> np.ndarray:
    x = _check4(x)
    stride = window if stride is None else stride
    oh = pool_output_size(x.shape[2], window, stride)
    ow = pool_output_size(x.shape[3], window, stride)
    y = np.empty((x.shape[0], x.shape[1], oh, ow), dtype=x.dtype)
    _avgpool_fwd(x, y, window, stride)
    return y


def avgpool_backward(x: np.ndarray, dy: np.ndarray, window: int = 2,
                     stride: int | None = None) -> np.ndarray:
    x = _check4(x)
    stride = window if stride is None else stride
    expected = (x.shape[0], x.shape[1], pool_output_size(x.shape[2], window, stride),
                pool_output_size(x.shape[3], window, stride))
    if dy.shape != expected:
        raise ValueError(f"output gradient has shape {dy.shape}, expected {expected}")
    dx = np.zeros_like(x)
    _avgpool_bwd(np.ascontiguousarray(dy, dtype=x.dtype), dx, window, stride)
    return dx


# --------------------------------------------------------------------------
# Batch normalization (training mode)
# --------------------------------------------------------------------------

@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    epsilon: float = 1e-5
    saved_mean: np.ndarray | None = field(default=None, repr=False)
    saved_invstd: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def identity(cls, channels: int, dtype=np.float64, epsilon: float = 1e-5) -> "BatchNormState":
        return cls(np.ones(channels, dtype=dtype), np.zeros(channels, dtype=dtype), epsilon)


@njit(parallel=True, cache=True)
def _bn_fwd(x, gamma, beta, eps, y, mean, invstd):
    n, c, h, w = x.shape
    m = n * h * w
    for ch in prange(c):
        s = 0.0
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    s += x[b, ch, i, j]
        mu = s / m
        v = 0.0
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    d = x[b, ch, i, j] - mu
                    v += d * d
        inv = 1.0 / np.sqrt(v / m + eps)
        mean[ch] = mu
        invstd[ch] = inv
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    y[b, ch, i, j] = gamma[ch] * (x[b, ch, i, j] - mu) * inv + beta[ch]


@njit(parallel=True, cache=True)
def _bn_bwd(x, dy, gamma, mean, invstd, dx, dgamma, dbeta):
    n, c, h, w = x.shape
    m = n * h * w
    for ch in prange(c):
        sdy = 0.0
        sdyx = 0.0
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    g = dy[b, ch, i, j]
                    sdy += g
                    sdyx += g * (x[b, ch, i, j] - mean[ch]) * invstd[ch]
        dbeta[ch] = sdy
        dgamma[ch] = sdyx
        k = gamma[ch] * invstd[ch] / m
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    xhat = (x[b, ch, i, j] - mean[ch]) * invstd[ch]
                    dx[b, ch, i, j] = k * (m * dy[b, ch, i, j] - sdy - xhat * sdyx)


def batchnorm_forward(x: np.ndarray, state: BatchNormState) -> np.ndarray:
    """Normalize each channel over (batch, height, width) with biased variance."""
    x = _check4(x)
    n, c, h, w = x.shape
    if n * h * w < 2:
        raise ValueError("batch normalization needs at least 2 values per channel")
    if state.gamma.shape != (c,) or state.beta.shape != (c,):
        raise ValueError("gamma/beta must have one entry per channel")
    y = np.empty_like(x)
    state.saved_mean = np.empty(c, dtype=np.float64)
    state.saved_invstd = np.empty(c, dtype=np.float64)
    _bn_fwd(x, state.gamma.astype(x.dtype), state.beta.astype(x.dtype), state.epsilon,
            y, state.saved_mean, state.saved_invstd)
    return y


def batchnorm_backward(x: np.ndarray, dy: np.ndarray, state: BatchNormState):
    """Returns ``(dx, dgamma, dbeta)``; requires a prior forward on ``x``."""
    x = _check4(x)
    _same_shape(x, dy)
    if state.saved_mean is None:
        raise RuntimeError("batchnorm_backward called before batchnorm_forward")
    c = x.shape[1]
    dx = np.empty_like(x)
    dgamma = np.empty(c, dtype=np.float64)
    dbeta = np.empty(c, dtype=np.float64)
    _bn_bwd(x, np.ascontiguousarray(dy, dtype=x.dtype), state.gamma.astype(np.float64),
            state.saved_mean, state.saved_invstd, dx, dgamma, dbeta)
    return dx, dgamma.astype(x.dtype), dbeta.astype(x.dtype)


# --------------------------------------------------------------------------
# Fully connected
# --------------------------------------------------------------------------

def connected_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``y = x W + bias`` for ``x`` of shape (batch, in) and ``W`` of shape (in, out)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"cannot multiply {x.shape} by {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ValueError("bias must have one entry per output")
    y = np.empty((x.shape[0], weight.shape[1]), dtype=x.dtype)
    y[...] = bias
    return gemm(x, weight.astype(x.dtype, copy=False), y, 1.0, 1.0)


def connected_backward(x: np.ndarray, weight: np.ndarray, dy: np.ndarray):
    """Returns ``(dx, dW, dbias)``."""
    if dy.shape != (x.shape[0], weight.shape[1]):
        raise ValueError(f"output gradient has shape {dy.shape}")
    w = weight.astype(x.dtype, copy=False)
    dy = dy.astype(x.dtype, copy=False)
    dx = gemm(dy, w, transpose_b=True)
    dw = gemm(x, dy, transpose_a=True)
    return dx, dw, dy.sum(axis=0)


# --------------------------------------------------------------------------
# Convolution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvParams:
    weights: np.ndarray     # (out_c, in_c, kh, kw)
    bias: np.ndarray        # (out_c,)
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ValueError("weights must be (out_c, in_c, kh, kw)")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bias must have one entry per output channel")
        if not np.isfinite(self.weights).all():
            raise ValueError("weights must be finite")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.weights.shape[2:]
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"{kh}x{kw} kernel does not fit a padded {h}x{w} input")
        return oh, ow


@njit(parallel=True, cache=True)
def _conv_fwd(x, wt, bias, y, stride, pad):
    n, cin, h, w = x.shape
    cout, _, kh, kw = wt.shape
    oh, ow = y.shape[2], y.shape[3]
    for p in prange(n * cout):
        b, o = p // cout, p % cout
        for i in range(oh):
            for j in range(ow):
                s = bias[o]
                for c in range(cin):
                    for u in range(kh):
                        r = i * stride + u - pad
                        if r < 0 or r >= h:
                            continue
                        for v in range(kw):
                            q = j * stride + v - pad
                            if q < 0 or q >= w:
                                continue
                            s += x[b, c, r, q] * wt[o, c, u, v]
                y[b, o, i, j] = s


@njit(parallel=True, cache=True)
def _conv_bwd_data(dy, wt, dx, stride, pad):
    n, cin, h, w = dx.shape
    cout, _, kh, kw = wt.shape
    oh, ow = dy.shape[2], dy.shape[3]
    for b in prange(n):
        for o in range(cout):
            for i in range(oh):
                for j in range(ow):
                    g = dy[b, o, i, j]
                    for c in range(cin):
                        for u in range(kh):
                            r = i * stride + u - pad
                            if r < 0 or r >= h:
                                continue
                            for v in range(kw):
                                q = j * stride + v - pad
                                if q < 0 or q >= w:
                                    continue
                                dx[b, c, r, q] += g * wt[o, c, u, v]


@njit(parallel=True, cache=True)
def _conv_bwd_filter(x, dy, dw, db, stride, pad):
    n, cin, h, w = x.shape
    cout, _, kh, kw = dw.shape
    oh, ow = dy.shape[2], dy.shape[3]
    for o in prange(cout):
        sb = 0.0
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    g = dy[b, o, i, j]
                    sb += g
                    for c in range(cin):
                        for u in range(kh):
                            r = i * stride + u - pad
                            if r < 0 or r >= h:
                                continue
                            for v in range(kw):
                                q = j * stride + v - pad
                                if q < 0 or q >= w:
                                    continue
                                dw[o, c, u, v] += g * x[b, c, r, q]
        db[o] = sb


def conv_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Direct cross-correlation with zero padding."""
    x = _check4(x)
    if x.shape[1] != p.weights.shape[1]:
        raise ValueError(f"input has {x.shape[1]} channels, filters expect {p.weights.shape[1]}")
    oh, ow = p.output_hw(x.shape[2], x.shape[3])
    y = np.empty((x.shape[0], p.out_channels, oh, ow), dtype=x.dtype)
    _conv_fwd(x, p.weights.astype(x.dtype), p.bias.astype(x.dtype), y, p.stride, p.padding)
    return y


def conv_backward(x: np.ndarray, dy: np.ndarray, p: ConvParams):
    """Returns ``(dx, dW, dbias)``."""
    x = _check4(x)
    oh, ow = p.output_hw(x.shape[2], x.shape[3])
    if dy.shape != (x.shape[0], p.out_channels, oh, ow):
        raise ValueError(f"output gradient has shape {dy.shape}")
    dy = np.ascontiguousarray(dy, dtype=x.dtype)
    wt = p.weights.astype(x.dtype)
    dx = np.zeros_like(x)
    dw = np.zeros_like(wt)
    db = np.zeros(p.out_channels, dtype=x.dtype)
    _conv_bwd_data(dy, wt, dx, p.stride, p.padding)
    _conv_bwd_filter(x, dy, dw, db, p.stride, p.padding)
    return dx, dw, db


# --------------------------------------------------------------------------
# Dropout (inverted)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DropoutMask:
    keep_prob: float
    seed: int
    mask: np.ndarray = field(repr=False)


@njit(parallel=True, cache=True)
def _dropout_mask(size, key, keep_prob):
    mask = np.empty(size, dtype=np.bool_)
    for i in prange(size):
        mask[i] = counter_uniform(key, i) < keep_prob
    return mask


def dropout_mask(shape, keep_prob: float, seed: int) -> DropoutMask:
    """Bernoulli(keep_prob) mask; element ``i`` depends only on (seed, i)."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError("keep_prob must lie in (0, 1]")
    key = np.uint64(mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    mask = _dropout_mask(int(np.prod(shape)), key, keep_prob).reshape(shape)
    return DropoutMask(keep_prob, seed, mask)


def dropout_forward(x: np.ndarray, keep_prob: float, seed: int):
    x = _check4(x)
    m = dropout_mask(x.shape, keep_prob, seed)
    scale = x.dtype.type(1.0 / keep_prob)
    return np.where(m.mask, x * scale, x.dtype.type(0)), m


def dropout_backward(dy: np.ndarray, mask: DropoutMask) -> np.ndarray:
    _same_shape(dy, mask.mask)
    scale = dy.dtype.type(1.0 / mask.keep_prob)
    return np.where(mask.mask, dy * scale, dy.dtype.type(0))


# --------------------------------------------------------------------------
# Softmax over channels
# --------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _softmax_fwd(z, y):
    n, k, h, w = z.shape
    for b in prange(n):
        for i in range(h):
            for j in range(w):
                mx = z[b, 0, i, j]
                for c in range(1, k):
                    if z[b, c, i, j] > mx:
                        mx = z[b, c, i, j]
                s = 0.0
                for c in range(k):
                    e = np.exp(z[b, c, i, j] - mx)
                    y[b, c, i, j] = e
                    s += e
                for c in range(k):
                    y[b, c, i, j] = y[b, c, i, j] / s


@njit(parallel=True, cache=True)
def _softmax_bwd(y, dy, dz):
    n, k, h, w = y.shape
    for b in prange(n):
        for i in range(h):
            for j in range(w):
                dot = 0.0
                for c in range(k):
                    dot += dy[b, c, i, j] * y[b, c, i, j]
                for c in range(k):
                    dz[b, c, i, j] = y[b, c, i, j] * (dy[b, c, i, j] - dot)


def softmax_forward(z: np.ndarray) -> np.ndarray:
    z = _check4(z, "scores")
    y = np.empty_like(z)
    _softmax_fwd(z, y)
    return y


def softmax_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the scores, given the forward output ``y``."""
    y = _check4(y)
    _same_shape(y, dy)
    dz = np.empty_like(y)
    _softmax_bwd(y, np.ascontiguousarray(dy, dtype=y.dtype), dz)
    return dz


# --------------------------------------------------------------------------
# Local response normalization (across channels)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LrnParams:
    n_neighborhood: int = 5
    k: float = 2.0
    alpha: float = 1e-4
    beta: float = 0.75

    def __post_init__(self):
        if self.n_neighborhood < 1:
            raise ValueError("neighborhood size must be >= 1")
        if not self.k > 0:
            raise ValueError("k must be positive")


@njit(parallel=True, cache=True)
def _lrn_scale(a, half, k, alpha, scale):
    n, nc, h, w = a.shape
    for b in prange(n):
        for i in range(h):
            for j in range(w):
                for c in range(nc):
                    s = 0.0
                    for q in range(max(0, c - half), min(nc - 1, c + half) + 1):
                        s += a[b, q, i, j] * a[b, q, i, j]
                    scale[b, c, i, j] = k + alpha * s


@njit(parallel=True, cache=True)
def _lrn_bwd(a, scale, dy, half, alpha, beta, dx):
    n, nc, h, w = a.shape
    for b in prange(n):
        for i in range(h):
            for j in range(w):
                for m in range(nc):
                    acc = 0.0
                    for c in range(max(0, m - half), min(nc - 1, m + half) + 1):
                        acc += dy[b, c, i, j] * a[b, c, i, j] * scale[b, c, i, j] ** (-beta - 1.0)
                    dx[b, m, i, j] = (dy[b, m, i, j] * scale[b, m, i, j] ** (-beta)
                                      - 2.0 * alpha * beta * a[b, m, i, j] * acc)


def lrn_forward(a: np.ndarray, p: LrnParams) -> np.ndarray:
    """``b_i = a_i / (k + alpha * sum_j a_j^2)^beta`` over the clamped channel window
    ``j in [max(0, i - n//2), min(N-1, i + n//2)]``."""
    a = _check4(a)
    scale = np.empty_like(a)
    _lrn_scale(a, p.n_neighborhood // 2, a.dtype.type(p.k), a.dtype.type(p.alpha), scale)
    return a * scale ** a.dtype.type(-p.beta)


def lrn_backward(a: np.ndarray, dy: np.ndarray, p: LrnParams) -> np.ndarray:
    a = _check4(a)
    _same_shape(a, dy)
    half = p.n_neighborhood // 2
    scale = np.empty_like(a)
    _lrn_scale(a, half, a.dtype.type(p.k), a.dtype.type(p.alpha), scale)
    dx = np.empty_like(a)
    _lrn_bwd(a, scale, np.ascontiguousarray(dy, dtype=a.dtype), half,
             a.dtype.type(p.alpha), a.dtype.type(p.beta), dx)
    return dx
