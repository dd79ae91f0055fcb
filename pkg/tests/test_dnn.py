import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heterobench._parallel import lanes
from heterobench.dnn import composite as C
from heterobench.dnn import layers as L
from heterobench.dnn import probes, reference as R
from heterobench.dnn.gradcheck import RTOL, gradient_error, gradients_match, numerical_gradient

shapes = st.tuples(st.integers(1, 2), st.integers(1, 3), st.integers(2, 5), st.integers(2, 5))
seeds = st.integers(0, 2 ** 32 - 1)
small = settings(max_examples=15, deadline=None)


def projected(fn, g):
    return lambda: float((fn() * g).sum())


# ReLU ---------------------------------------------------------------------

def test_relu_eq1_example():
    x = np.array([-1.0, 2.0]).reshape(1, 2, 1, 1)
    assert L.relu_forward(x).ravel().tolist() == [0.0, 2.0]


def test_relu_dead_region():
    x = -np.ones((2, 3, 4, 4))
    assert not L.relu_forward(x).any() and not L.relu_backward(x, np.ones_like(x)).any()


def test_relu_backward_shape_mismatch():
    with pytest.raises(ValueError):
        L.relu_backward(np.ones((1, 1, 2, 2)), np.ones((1, 1, 2, 3)))


@small
@given(shapes, seeds)
def test_relu_gradient(shape, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x[np.abs(x) < 1e-3] = 0.5            # keep away from the kink
    g = rng.standard_normal(shape)
    num = numerical_gradient(projected(lambda: L.relu_forward(x), g), x)
    assert gradients_match(L.relu_backward(x, g), num)


# Average pooling ----------------------------------------------------------

def test_pool_constant_stays_constant():
    assert np.array_equal(L.avgpool_forward(np.full((1, 2, 4, 6), 3.0), 2), np.full((1, 2, 2, 3), 3.0))


def test_pool_2x2_mean():
    assert L.avgpool_forward(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]), 2).item() == 2.5


def test_pool_non_integral_dims():
    with pytest.raises(ValueError):
        L.avgpool_forward(np.ones((1, 1, 5, 4)), 2)


@small
@given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 2), st.integers(1, 2), seeds)
def test_pool_gradient(n, c, hm, wm, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, 2 * hm, 2 * wm))
    g = rng.standard_normal((n, c, hm, wm))
    num = numerical_gradient(projected(lambda: L.avgpool_forward(x, 2), g), x)
    assert gradients_match(L.avgpool_backward(x, g, 2), num)


# Batch normalization ------------------------------------------------------

def test_batchnorm_normalizes_each_channel():
    x = np.random.default_rng(0).standard_normal((4, 3, 6, 6)) * 5 + 2
    y = L.batchnorm_forward(x, L.BatchNormState.identity(3))
    assert np.abs(y.mean(axis=(0, 2, 3))).max() <= 1e-6
    assert np.abs(y.var(axis=(0, 2, 3)) - 1).max() <= 1e-4


def test_batchnorm_constant_channel_gives_beta():
    x = np.broadcast_to(np.array([1.0, -4.0])[None, :, None, None], (2, 2, 3, 3)).copy()
    st_ = L.BatchNormState(np.array([2.0, 3.0]), np.array([0.5, -0.25]))
    y = L.batchnorm_forward(x, st_)
    assert np.allclose(y[:, 0], 0.5) and np.allclose(y[:, 1], -0.25)


def test_batchnorm_degenerate_reduction():
    with pytest.raises(ValueError):
        L.batchnorm_forward(np.ones((1, 2, 1, 1)), L.BatchNormState.identity(2))
    with pytest.raises(ValueError):
        L.BatchNormState(np.ones(1), np.zeros(1), epsilon=0.0)


def test_batchnorm_matches_reference():
    rng = np.random.default_rng(1)
    x, dy = rng.standard_normal((3, 4, 5, 5)), rng.standard_normal((3, 4, 5, 5))
    st_ = L.BatchNormState(rng.random(4) + 0.5, rng.standard_normal(4))
    y = L.batchnorm_forward(x, st_)
    assert np.allclose(y, R.batchnorm(x, st_.gamma, st_.beta, st_.epsilon), rtol=1e-10, atol=1e-12)
    for got, ref in zip(L.batchnorm_backward(x, dy, st_),
                        R.batchnorm_grad(x, dy, st_.gamma, st_.epsilon)):
        assert np.allclose(got, ref, rtol=1e-9, atol=1e-12)


@small
@given(shapes, seeds)
def test_batchnorm_gradient(shape, seed):
    rng = np.random.default_rng(seed)
    x, g = rng.standard_normal(shape), rng.standard_normal(shape)
    gamma, beta = rng.random(shape[1]) + 0.5, rng.standard_normal(shape[1])

    def fwd():
        return L.batchnorm_forward(x, L.BatchNormState(gamma, beta))
    dx, dgamma, dbeta = L.batchnorm_backward(x, g, _fitted(gamma, beta, x))
    f = projected(fwd, g)
    assert gradients_match(dx, numerical_gradient(f, x))
    assert gradients_match(dgamma, numerical_gradient(f, gamma))
    assert gradients_match(dbeta, numerical_gradient(f, beta))


def _fitted(gamma, beta, x):
    s = L.BatchNormState(gamma, beta)
    L.batchnorm_forward(x, s)
    return s


# Connected ----------------------------------------------------------------

def test_connected_identity_weight():
    x = np.random.default_rng(0).standard_normal((5, 7))
    assert np.array_equal(L.connected_forward(x, np.eye(7), np.zeros(7)), x)


def test_connected_zero_input_gives_bias():
    b = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(L.connected_forward(np.zeros((4, 6)), np.ones((6, 3)), b), np.tile(b, (4, 1)))


def test_connected_dimension_mismatch():
    with pytest.raises(ValueError):
        L.connected_forward(np.ones((2, 3)), np.ones((4, 2)), np.zeros(2))


def test_connected_gradients_4_6_3():
    rng = np.random.default_rng(2)
    x, w, b = rng.standard_normal((4, 6)), rng.standard_normal((6, 3)), rng.standard_normal(3)
    g = rng.standard_normal((4, 3))
    f = projected(lambda: L.connected_forward(x, w, b), g)
    dx, dw, db = L.connected_backward(x, w, g)
    assert gradients_match(dx, numerical_gradient(f, x))
    assert gradients_match(dw, numerical_gradient(f, w))
    assert gradients_match(db, numerical_gradient(f, b))


# Convolution --------------------------------------------------------------

def test_conv_delta_kernel_is_identity():
    x = np.random.default_rng(0).standard_normal((2, 1, 6, 7))
    p = L.ConvParams(np.ones((1, 1, 1, 1)), np.zeros(1))
    assert np.array_equal(L.conv_forward(x, p), x)


def test_conv_228_to_226():
    x = np.random.default_rng(0).standard_normal((1, 3, 228, 228)).astype(np.float32)
    p = L.ConvParams(np.ones((1, 3, 3, 3), dtype=np.float32), np.zeros(1, dtype=np.float32))
    assert L.conv_forward(x, p).shape == (1, 1, 226, 226)


def test_conv_invalid_geometry():
    with pytest.raises(ValueError):
        L.ConvParams(np.ones((1, 1, 3, 3)), np.zeros(1), stride=0)
    with pytest.raises(ValueError):
        L.conv_forward(np.ones((1, 1, 2, 2)), L.ConvParams(np.ones((1, 1, 3, 3)), np.zeros(1)))


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1)])
def test_conv_gradients_2x3x8x8(stride, pad):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 3, 8, 8))
    p = L.ConvParams(rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4), stride, pad)
    y = L.conv_forward(x, p)
    assert np.allclose(y, R.conv(x, p.weights, p.bias, stride, pad), rtol=1e-10, atol=1e-12)
    g = rng.standard_normal(y.shape)
    dx, dw, db = L.conv_backward(x, g, p)
    f = projected(lambda: L.conv_forward(x, p), g)
    assert gradients_match(dx, numerical_gradient(f, x))
    assert gradients_match(dw, numerical_gradient(f, p.weights))
    assert gradients_match(db, numerical_gradient(f, p.bias))


# Dropout ------------------------------------------------------------------

def test_dropout_keep_one_is_identity():
    x = np.random.default_rng(0).standard_normal((2, 3, 4, 4))
    y, m = L.dropout_forward(x, 1.0, 5)
    assert np.array_equal(y, x) and m.mask.all()


def test_dropout_kept_fraction_concentrates():
    m = L.dropout_mask((10 ** 6,), 0.5, 17)
    assert abs(m.mask.mean() - 0.5) <= 0.002


def test_dropout_same_seed_same_mask_any_lanes():
    with lanes(1):
        a = L.dropout_mask((3, 1000), 0.3, 99).mask
    with lanes(8):
        b = L.dropout_mask((3, 1000), 0.3, 99).mask
    assert np.array_equal(a, b)
    assert np.array_equal(a.ravel(), R.dropout_keep(3000, 0.3, 99))


def test_dropout_preserves_expectation():
    x = np.random.default_rng(1).random((10, 10, 100, 100)) + 1.0
    y, _ = L.dropout_forward(x, 0.8, 3)
    n = x.size
    # y_i = x_i b_i / p, Var <= E[x^2] (1-p)/p
    bound = 3 * math.sqrt((x ** 2).mean() * 0.2 / 0.8 / n)
    assert abs(y.mean() - x.mean()) <= bound


def test_dropout_keep_prob_range():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            L.dropout_forward(np.ones((1, 1, 2, 2)), bad, 0)


@small
@given(shapes, st.floats(0.1, 1.0), seeds)
def test_dropout_gradient(shape, keep, seed):
    rng = np.random.default_rng(seed)
    x, g = rng.standard_normal(shape), rng.standard_normal(shape)
    _, mask = L.dropout_forward(x, keep, seed)
    num = numerical_gradient(projected(lambda: L.dropout_forward(x, keep, seed)[0], g), x)
    assert gradients_match(L.dropout_backward(g, mask), num)


# Softmax ------------------------------------------------------------------

def test_softmax_uniform_is_one_over_k():
    y = L.softmax_forward(np.full((2, 7, 3, 3), 4.2))
    assert np.abs(y - 1 / 7).max() <= 1e-6


@settings(max_examples=40, deadline=None)
@given(shapes, seeds, st.floats(-50, 50))
def test_softmax_sums_to_one_and_shift_invariant(shape, seed, shift):
    z = np.random.default_rng(seed).standard_normal(shape) * 10
    y = L.softmax_forward(z)
    assert np.abs(y.sum(axis=1) - 1).max() <= 1e-6
    assert ((y >= 0) & (y <= 1)).all()
    if shape[1] > 1 and np.ptp(z, axis=1).max() < 30:   # wider gaps round to exactly 0 or 1
        assert ((y > 0) & (y < 1)).all()
    ys = L.softmax_forward(z + shift)
    assert np.abs(ys - y).max() <= 1e-6
    assert np.array_equal(ys.argmax(axis=1), y.argmax(axis=1))


@small
@given(shapes, seeds)
def test_softmax_gradient(shape, seed):
    rng = np.random.default_rng(seed)
    z, g = rng.standard_normal(shape), rng.standard_normal(shape)
    y = L.softmax_forward(z)
    num = numerical_gradient(projected(lambda: L.softmax_forward(z), g), z)
    assert gradients_match(L.softmax_backward(y, g), num)


# LRN ----------------------------------------------------------------------

def test_lrn_alpha_zero():
    a = np.random.default_rng(0).standard_normal((2, 6, 3, 3))
    b = L.lrn_forward(a, L.LrnParams(5, 2.0, 0.0, 0.75))
    assert np.allclose(b, a / 2.0 ** 0.75, rtol=1e-14)


def test_lrn_hand_case():
    b = L.lrn_forward(np.full((1, 1, 1, 1), 2.0), L.LrnParams(1, 1.0, 1.0, 1.0))
    assert abs(b.item() - 0.4) <= 1e-7


def test_lrn_window_is_clamped_and_uses_neighbors():
    a = np.arange(1.0, 5.0).reshape(1, 4, 1, 1)
    p = L.LrnParams(3, 1.0, 1.0, 1.0)
    # channel 0 sees {0,1}; channel 3 sees {2,3}
    expect = [1 / (1 + 1 + 4), 2 / (1 + 1 + 4 + 9), 3 / (1 + 4 + 9 + 16), 4 / (1 + 9 + 16)]
    assert np.allclose(L.lrn_forward(a, p).ravel(), expect, rtol=1e-14)
    assert np.allclose(L.lrn_forward(a, p), R.lrn(a, 3, 1.0, 1.0, 1.0), rtol=1e-14)


def test_lrn_param_validation():
    with pytest.raises(ValueError):
        L.LrnParams(0)
    with pytest.raises(ValueError):
        L.LrnParams(5, k=0.0)


@small
@given(shapes, st.sampled_from([1, 2, 3, 5]), seeds)
def test_lrn_gradient(shape, n, seed):
    rng = np.random.default_rng(seed)
    a, g = rng.standard_normal(shape), rng.standard_normal(shape)
    p = L.LrnParams(n, 2.0, 0.1, 0.75)
    num = numerical_gradient(projected(lambda: L.lrn_forward(a, p), g), a)
    assert gradients_match(L.lrn_backward(a, g, p), num)


# Composite ----------------------------------------------------------------

def test_composite_loss_is_finite_and_non_negative():
    rng = np.random.default_rng(0)
    net = C.CompositeNet.create((3, 16, 16), 10, rng)
    res = C.forward_backward(net, rng.standard_normal((4, 3, 16, 16)), rng.integers(0, 10, 4))
    assert math.isfinite(res.loss) and res.loss >= 0
    assert set(res.layer_seconds) >= {"conv_forward", "conv_backward", "softmax_forward"}
    assert all(np.isfinite(g).all() for g in res.grads.values())


def test_uniform_probabilities_give_ln_k():
    k = 12
    assert C.cross_entropy(np.full((3, k), 1 / k), np.array([0, 5, 11])) == pytest.approx(math.log(k), rel=1e-12)


def test_composite_uniform_logits_give_ln_k():
    rng = np.random.default_rng(1)
    net = C.CompositeNet.create((3, 8, 8), 6, rng)
    net.fc_weight[:] = 0.0
    net.fc_bias[:] = 0.0
    assert C.loss(net, rng.standard_normal((2, 3, 8, 8)), np.array([1, 4])) == pytest.approx(math.log(6), rel=1e-12)


def test_composite_input_gradient_1e4():
    rng = np.random.default_rng(2)
    net = C.CompositeNet.create((3, 8, 8), 4, rng)
    x, labels = rng.standard_normal((1, 3, 8, 8)), np.array([2])
    res = C.forward_backward(net, x, labels)
    num = numerical_gradient(lambda: C.loss(net, x, labels), x)
    assert gradient_error(res.grads["input"], num) <= 1e-4


# Probes and determinism ---------------------------------------------------

@pytest.mark.parametrize("name", sorted(probes.PROBES))
def test_probe_passes(name):
    assert probes.run_probe(name) <= RTOL


def test_forwards_are_lane_independent():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((4, 8, 12, 12)).astype(np.float32)
    p = L.ConvParams(rng.standard_normal((5, 8, 3, 3)).astype(np.float32), np.zeros(5, np.float32))
    lp = L.LrnParams()
    outs = []
    for k in (1, 8):
        with lanes(k):
            bn = L.BatchNormState.identity(8, np.float32)
            outs.append([L.conv_forward(x, p), L.batchnorm_forward(x, bn), L.softmax_forward(x),
                         L.lrn_forward(x, lp), *L.conv_backward(x, np.ones((4, 5, 10, 10), np.float32), p)])
    assert all(np.array_equal(a, b) for a, b in zip(*outs))


def test_gradient_check_detects_a_wrong_gradient():
    rng = np.random.default_rng(5)
    x, g = rng.standard_normal((2, 3, 4, 4)), rng.standard_normal((2, 3, 4, 4))
    p = L.LrnParams(3, 2.0, 0.1, 0.75)
    num = numerical_gradient(projected(lambda: L.lrn_forward(a=x, p=p), g), x)
    good = L.lrn_backward(x, g, p)
    assert gradients_match(good, num)
    assert not gradients_match(good * (1 + 1e-4), num)
    assert not gradients_match(L.relu_backward(x, g), num)
