"""Small end-to-end network chaining the layer kernels:
conv(8 x 3x3) -> relu -> avgpool(2) -> batchnorm -> connected -> softmax,
with a mean cross-entropy loss."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from heterobench.dnn import layers as L


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean ``-log p[label]`` over the batch; ``probs`` has shape (n, K)."""
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(picked).mean())


@dataclass
class CompositeNet:
    conv: L.ConvParams
    bn: L.BatchNormState
    fc_weight: np.ndarray
    fc_bias: np.ndarray
    pool: int = 2

    @classmethod
    def create(cls, in_shape: tuple[int, int, int], classes: int,
               rng: np.random.Generator, dtype=np.float64, filters: int = 8) -> "CompositeNet":
        c, h, w = in_shape
        conv = L.ConvParams(rng.standard_normal((filters, c, 3, 3)).astype(dtype) / np.sqrt(9 * c),
                            rng.standard_normal(filters).astype(dtype) * 0.1)
        oh, ow = conv.output_hw(h, w)
        features = filters * (oh // 2) * (ow // 2)
        bn = L.BatchNormState(1.0 + 0.1 * rng.standard_normal(filters).astype(dtype),
                              0.1 * rng.standard_normal(filters).astype(dtype))
        fc_w = rng.standard_normal((features, classes)).astype(dtype) / np.sqrt(features)
        fc_b = 0.1 * rng.standard_normal(classes).astype(dtype)
        return cls(conv, bn, fc_w, fc_b)


@dataclass
class CompositeResult:
    loss: float
    probs: np.ndarray
    grads: dict[str, np.ndarray]
    layer_seconds: dict[str, float]


def forward(net: CompositeNet, x: np.ndarray, timings: dict | None = None):
    t = timings if timings is not None else {}
    cache = {"x": x}

    def timed(name, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        t[name] = t.get(name, 0.0) + time.perf_counter() - t0
        return out

    cache["conv"] = timed("conv_forward", L.conv_forward, x, net.conv)
    cache["relu"] = timed("relu_forward", L.relu_forward, cache["conv"])
    cache["pool"] = timed("pool_forward", L.avgpool_forward, cache["relu"], net.pool)
    cache["bn"] = timed("batchnorm_forward", L.batchnorm_forward, cache["pool"], net.bn)
    flat = cache["bn"].reshape(x.shape[0], -1)
    cache["fc"] = timed("connected_forward", L.connected_forward, flat, net.fc_weight, net.fc_bias)
    probs4 = timed("softmax_forward", L.softmax_forward, cache["fc"][:, :, None, None])
    cache["probs"] = probs4
    return probs4[:, :, 0, 0], cache


def loss(net: CompositeNet, x: np.ndarray, labels: np.ndarray) -> float:
    probs, _ = forward(net, x)
    return cross_entropy(probs, labels)


def forward_backward(net: CompositeNet, x: np.ndarray, labels: np.ndarray) -> CompositeResult:
    """One forward and backward pass; gradients for the input and every parameter."""
    timings: dict[str, float] = {}
    probs, cache = forward(net, x, timings)
    n = x.shape[0]

    def timed(name, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        timings[name] = time.perf_counter() - t0
        return out

    dprobs = np.zeros_like(cache["probs"])
    dprobs[np.arange(n), labels, 0, 0] = -1.0 / (n * probs[np.arange(n), labels])
    dfc = timed("softmax_backward", L.softmax_backward, cache["probs"], dprobs)[:, :, 0, 0]
    flat = cache["bn"].reshape(n, -1)
    dflat, dfw, dfb = timed("connected_backward", L.connected_backward, flat, net.fc_weight, dfc)
    dbn, dgamma, dbeta = timed("batchnorm_backward", L.batchnorm_backward, cache["pool"],
                               dflat.reshape(cache["bn"].shape), net.bn)
    dpool = timed("pool_backward", L.avgpool_backward, cache["relu"], dbn, net.pool)
    drelu = timed("relu_backward", L.relu_backward, cache["conv"], dpool)
    dx, dw, db = timed("conv_backward", L.conv_backward, x, drelu, net.conv)
    grads = {"input": dx, "conv_weight": dw, "conv_bias": db, "bn_gamma": dgamma,
             "bn_beta": dbeta, "fc_weight": dfw, "fc_bias": dfb}
    return CompositeResult(cross_entropy(probs, labels), probs, grads, timings)
