"""Whole-array numpy formulations of the layer kernels.

Written independently of the numba kernels and used as their forward and
backward oracles. Everything is computed in float64.
"""

from __future__ import annotations

import numpy as np


def _f64(x):
    return np.asarray(x, dtype=np.float64)


def relu(x):
    return np.maximum(_f64(x), 0.0)


def relu_grad(x, dy):
    return np.where(_f64(x) > 0, _f64(dy), 0.0)


def avgpool(x, window):
    n, c, h, w = x.shape
    oh, ow = h // window, w // window
    t = _f64(x)[:, :, :oh * window, :ow * window]
    return t.reshape(n, c, oh, window, ow, window).mean(axis=(3, 5))


def avgpool_grad(x, dy, window):
    dx = np.zeros(x.shape)
    oh, ow = dy.shape[2:]
    spread = np.repeat(np.repeat(_f64(dy), window, axis=2), window, axis=3) / window ** 2
    dx[:, :, :oh * window, :ow * window] = spread
    return dx


def batchnorm(x, gamma, beta, eps):
    x = _f64(x)
    mu = x.mean(axis=(0, 2, 3), keepdims=True)
    var = x.var(axis=(0, 2, 3), keepdims=True)
    xhat = (x - mu) / np.sqrt(var + eps)
    return _f64(gamma)[None, :, None, None] * xhat + _f64(beta)[None, :, None, None]


def batchnorm_grad(x, dy, gamma, eps):
    x, dy = _f64(x), _f64(dy)
    m = x.shape[0] * x.shape[2] * x.shape[3]
    mu = x.mean(axis=(0, 2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(x.var(axis=(0, 2, 3), keepdims=True) + eps)
    xhat = (x - mu) * inv
    dbeta = dy.sum(axis=(0, 2, 3))
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    g = _f64(gamma)[None, :, None, None]
    dx = g * inv / m * (m * dy - dbeta[None, :, None, None] - xhat * dgamma[None, :, None, None])
    return dx, dgamma, dbeta


def connected(x, weight, bias):
    return _f64(x) @ _f64(weight) + _f64(bias)


def connected_grad(x, weight, dy):
    dy = _f64(dy)
    return dy @ _f64(weight).T, _f64(x).T @ dy, dy.sum(axis=0)


def _pad(x, pad):
    return np.pad(_f64(x), ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else _f64(x)


def conv(x, weights, bias, stride=1, pad=0):
    xp = _pad(x, pad)
    o, _, kh, kw = weights.shape
    oh = (xp.shape[2] - kh) // stride + 1
    ow = (xp.shape[3] - kw) // stride + 1
    y = np.zeros((x.shape[0], o, oh, ow)) + _f64(bias)[None, :, None, None]
    wt = _f64(weights)
    for u in range(kh):
        for v in range(kw):
            patch = xp[:, :, u:u + stride * (oh - 1) + 1:stride, v:v + stride * (ow - 1) + 1:stride]
            y += np.einsum("nchw,oc->nohw", patch, wt[:, :, u, v], optimize=True)
    return y


def conv_grad(x, weights, dy, stride=1, pad=0):
    xp = _pad(x, pad)
    dxp = np.zeros_like(xp)
    wt, dy = _f64(weights), _f64(dy)
    dw = np.zeros_like(wt)
    _, _, kh, kw = wt.shape
    oh, ow = dy.shape[2:]
    for u in range(kh):
        for v in range(kw):
            rs = slice(u, u + stride * (oh - 1) + 1, stride)
            cs = slice(v, v + stride * (ow - 1) + 1, stride)
            dw[:, :, u, v] = np.einsum("nohw,nchw->oc", dy, xp[:, :, rs, cs], optimize=True)
            dxp[:, :, rs, cs] += np.einsum("nohw,oc->nchw", dy, wt[:, :, u, v], optimize=True)
    h, w = x.shape[2:]
    dx = dxp[:, :, pad:pad + h, pad:pad + w]
    return dx, dw, dy.sum(axis=(0, 2, 3))


def _splitmix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def dropout_keep(size: int, keep_prob: float, seed: int) -> np.ndarray:
    """Keep flags for elements ``0..size-1``; uniform ``u_i`` from the counter hash."""
    with np.errstate(over="ignore"):
        key = _splitmix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
        z = _splitmix(key ^ _splitmix(np.arange(size, dtype=np.uint64)))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 2 ** 53) < keep_prob


def softmax(z):
    z = _f64(z)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_grad(y, dy):
    y, dy = _f64(y), _f64(dy)
    return y * (dy - (dy * y).sum(axis=1, keepdims=True))


def _lrn_window_sum(v, half):
    """``out[:, i] = sum of v[:, j]`` for ``max(0, i-half) <= j <= min(N-1, i+half)``."""
    n = v.shape[1]
    csum = np.concatenate([np.zeros_like(v[:, :1]), np.cumsum(v, axis=1)], axis=1)
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1) + 1
    return csum[:, hi] - csum[:, lo]


def lrn(a, n_neighborhood, k, alpha, beta):
    a = _f64(a)
    s = k + alpha * _lrn_window_sum(a * a, n_neighborhood // 2)
    return a * s ** -beta


def lrn_grad(a, dy, n_neighborhood, k, alpha, beta):
    a, dy = _f64(a), _f64(dy)
    half = n_neighborhood // 2
    s = k + alpha * _lrn_window_sum(a * a, half)
    inner = _lrn_window_sum(dy * a * s ** (-beta - 1.0), half)
    return dy * s ** -beta - 2.0 * alpha * beta * a * inner
