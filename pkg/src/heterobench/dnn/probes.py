"""Finite-difference probes: one per layer plus the composite network.

Each probe builds a small float64 problem from a fixed seed, differentiates
``sum(forward(x) * g)`` for a random ``g`` both analytically and by central
differences, and returns the worst relative error over every gradient the
layer produces.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from heterobench.dnn import composite as C
from heterobench.dnn import layers as L
from heterobench.dnn.gradcheck import gradient_error, numerical_gradient

PROBE_SHAPE = (2, 3, 5, 5)


def _errors(pairs) -> float:
    return max(gradient_error(a, n) for a, n in pairs)


def _projected(forward: Callable[[], np.ndarray], g: np.ndarray) -> Callable[[], float]:
    return lambda: float((forward() * g).sum())


def probe_activation(rng: np.random.Generator) -> float:
    x = rng.standard_normal(PROBE_SHAPE)
    x += np.sign(x) * 0.1   # keep every element clear of the kink at 0
    g = rng.standard_normal(x.shape)
    f = _projected(lambda: L.relu_forward(x), g)
    return _errors([(L.relu_backward(x, g), numerical_gradient(f, x))])


def probe_pooling(rng: np.random.Generator) -> float:
    x = rng.standard_normal((2, 3, 6, 6))
    g = rng.standard_normal((2, 3, 3, 3))
    f = _projected(lambda: L.avgpool_forward(x, 2), g)
    return _errors([(L.avgpool_backward(x, g, 2), numerical_gradient(f, x))])


def probe_batchnorm(rng: np.random.Generator) -> float:
    x = rng.standard_normal(PROBE_SHAPE)
    st = L.BatchNormState(1.0 + 0.3 * rng.standard_normal(3), rng.standard_normal(3))
    g = rng.standard_normal(x.shape)
    L.batchnorm_forward(x, st)
    dx, dgamma, dbeta = L.batchnorm_backward(x, g, st)
    f = _projected(lambda: L.batchnorm_forward(x, st), g)
    return _errors([(dx, numerical_gradient(f, x)),
                    (dgamma, numerical_gradient(f, st.gamma)),
                    (dbeta, numerical_gradient(f, st.beta))])


def probe_connected(rng: np.random.Generator) -> float:
    x = rng.standard_normal((4, 6))
    w = rng.standard_normal((6, 3))
    b = rng.standard_normal(3)
    g = rng.standard_normal((4, 3))
    dx, dw, db = L.connected_backward(x, w, g)
    f = _projected(lambda: L.connected_forward(x, w, b), g)
    return _errors([(dx, numerical_gradient(f, x)), (dw, numerical_gradient(f, w)),
                    (db, numerical_gradient(f, b))])


def probe_convolution(rng: np.random.Generator) -> float:
    x = rng.standard_normal((2, 3, 6, 6))
    p = L.ConvParams(rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4), stride=1, padding=1)
    g = rng.standard_normal((2, 4, 6, 6))
    dx, dw, db = L.conv_backward(x, g, p)
    f = _projected(lambda: L.conv_forward(x, p), g)
    return _errors([(dx, numerical_gradient(f, x)), (dw, numerical_gradient(f, p.weights)),
                    (db, numerical_gradient(f, p.bias))])


def probe_dropout(rng: np.random.Generator) -> float:
    x = rng.standard_normal(PROBE_SHAPE)
    g = rng.standard_normal(x.shape)
    _, mask = L.dropout_forward(x, 0.6, 99)
    f = _projected(lambda: L.dropout_forward(x, 0.6, 99)[0], g)
    return _errors([(L.dropout_backward(g, mask), numerical_gradient(f, x))])


def probe_softmax(rng: np.random.Generator) -> float:
    z = rng.standard_normal(PROBE_SHAPE)
    g = rng.standard_normal(z.shape)
    f = _projected(lambda: L.softmax_forward(z), g)
    return _errors([(L.softmax_backward(L.softmax_forward(z), g), numerical_gradient(f, z))])


def probe_lrn(rng: np.random.Generator) -> float:
    a = rng.standard_normal((2, 7, 4, 4))
    p = L.LrnParams(n_neighborhood=5, k=2.0, alpha=0.1, beta=0.75)
    g = rng.standard_normal(a.shape)
    f = _projected(lambda: L.lrn_forward(a, p), g)
    return _errors([(L.lrn_backward(a, g, p), numerical_gradient(f, a))])


def probe_composite(rng: np.random.Generator) -> float:
    """Loss gradient of the composite network w.r.t. a 1x3x8x8 input."""
    net = C.CompositeNet.create((3, 8, 8), classes=4, rng=rng)
    x = rng.standard_normal((1, 3, 8, 8))
    labels = rng.integers(0, 4, size=1)
    res = C.forward_backward(net, x, labels)
    numeric = numerical_gradient(lambda: C.loss(net, x, labels), x)
    return gradient_error(res.grads["input"], numeric)


PROBES: dict[str, Callable[[np.random.Generator], float]] = {
    "activation": probe_activation,
    "pooling": probe_pooling,
    "batchnorm": probe_batchnorm,
    "connected": probe_connected,
    "convolution": probe_convolution,
    "dropout": probe_dropout,
    "softmax": probe_softmax,
    "lrn": probe_lrn,
    "composite": probe_composite,
}


def run_probe(name: str, seed: int = 0) -> float:
    return PROBES[name](np.random.default_rng(seed))
