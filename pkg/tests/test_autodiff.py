"""Gradient correctness of the tensor tape against finite differences."""

import numpy as np
import pytest

from vitac import tensor as T
from vitac.gradcheck import check_gradients, param64
from vitac.tensor import Tensor


def rng():
    return np.random.default_rng(12345)


def test_elementwise_gradients():
    r = rng()
    a = param64(r, (3, 4))
    b = param64(r, (3, 4))
    cases = {
        "add": lambda: T.tsum(T.add(a, b)),
        "sub": lambda: T.tsum(T.mul(T.sub(a, b), T.sub(a, b))),
        "mul": lambda: T.tsum(T.mul(a, b)),
        "div": lambda: T.tsum(T.div(a, T.add(T.mul(b, b), Tensor(np.float64(1.0))))),
        "neg": lambda: T.tsum(T.mul(T.neg(a), b)),
        "exp": lambda: T.tsum(T.exp(T.mul(a, Tensor(np.float64(0.3))))),
        "tanh": lambda: T.tsum(T.tanh(a)),
        "softplus": lambda: T.tsum(T.softplus(a)),
        "pow": lambda: T.tsum(T.power(T.add(T.mul(a, a), Tensor(np.float64(0.5))), 1.7)),
    }
    for name, build in cases.items():
        res = check_gradients(name, build, [a, b])
        assert res.passed, f"{name}: max rel err {res.max_rel_err:.2e}"


def test_log_and_sqrt_gradients():
    r = rng()
    a = Tensor(r.uniform(0.5, 2.0, (4, 3)), requires_grad=True)
    res = check_gradients("log", lambda: T.tsum(T.log(a)), [a])
    assert res.passed
    res = check_gradients("sqrt", lambda: T.tsum(T.sqrt(a)), [a])
    assert res.passed


def test_broadcast_gradients():
    r = rng()
    a = param64(r, (5, 4))
    b = param64(r, (4,))
    c = param64(r, (5, 1))
    res = check_gradients("bcast", lambda: T.tsum(T.mul(T.add(a, b), c)), [a, b, c])
    assert res.passed


def test_relu_and_clip_gradients_away_from_kinks():
    r = rng()
    base = r.standard_normal((6, 6))
    base[np.abs(base) < 0.1] = 0.5  # keep clear of the kink at zero
    a = Tensor(base, requires_grad=True)
    w = Tensor(base.copy())
    res = check_gradients("relu", lambda: T.tsum(T.mul(T.relu(a), w)), [a])
    assert res.passed
    b = Tensor(base * 0.3, requires_grad=True)
    res = check_gradients("clip", lambda: T.tsum(T.clip(b, -0.45, 0.45)), [b])
    assert res.passed


def test_min_max_gradients():
    r = rng()
    a = param64(r, (4, 4))
    b = param64(r, (4, 4))
    # keep elements well separated so FD never crosses the switch point
    b.data += np.where(np.abs(a.data - b.data) < 0.1, 0.5, 0.0)
    res = check_gradients("minimum", lambda: T.tsum(T.minimum(a, b)), [a, b])
    assert res.passed
    w = Tensor(rng().standard_normal((4, 4)))
    res = check_gradients("maximum", lambda: T.tsum(T.mul(T.maximum(a, b), w)), [a, b])
    assert res.passed


def test_reduction_gradients():
    r = rng()
    a = param64(r, (3, 4, 5))
    for name, build in {
        "sum_axis": lambda: T.tsum(T.mul(T.tsum(a, axis=1), T.tsum(a, axis=1))),
        "mean_axis": lambda: T.tsum(T.mul(T.tmean(a, axis=(0, 2)), Tensor(np.arange(4.0)))),
        "mean_keep": lambda: T.tsum(T.mul(a, T.tmean(a, axis=2, keepdims=True))),
    }.items():
        res = check_gradients(name, build, [a])
        assert res.passed, name


def test_matmul_gradients():
    r = rng()
    a = param64(r, (3, 4))
    b = param64(r, (4, 5))
    res = check_gradients("matmul2d", lambda: T.tsum(T.matmul(a, b)), [a, b])
    assert res.passed
    c = param64(r, (2, 3, 4))
    res = check_gradients("matmulNDx2", lambda: T.tsum(T.mul(T.matmul(c, b), T.matmul(c, b))), [c, b])
    assert res.passed
    d = param64(r, (2, 4, 3))
    res = check_gradients("batched", lambda: T.tsum(T.matmul(c, d)), [c, d])
    assert res.passed


def test_shape_op_gradients():
    r = rng()
    a = param64(r, (2, 3, 4))
    b = param64(r, (2, 5, 4))
    res = check_gradients("reshape", lambda: T.tsum(T.mul(T.reshape(a, (6, 4)), T.reshape(a, (6, 4)))), [a])
    assert res.passed
    res = check_gradients("transpose", lambda: T.tsum(T.mul(T.transpose(a, (2, 0, 1)), T.transpose(a, (2, 0, 1)))), [a])
    assert res.passed
    res = check_gradients("concat", lambda: T.tsum(T.power(T.concat([a, b], axis=1), 2.0)), [a, b])
    assert res.passed


def test_softmax_logsumexp_gradients():
    r = rng()
    a = param64(r, (3, 5))
    w = Tensor(r.standard_normal((3, 5)))
    w_row = Tensor(r.standard_normal((1, 5)))
    res = check_gradients("softmax", lambda: T.tsum(T.mul(T.softmax(a, axis=1), w)), [a])
    assert res.passed
    res = check_gradients("logsumexp", lambda: T.tsum(T.logsumexp(a, axis=1)), [a])
    assert res.passed
    res = check_gradients("logsumexp_keep", lambda: T.tsum(T.mul(T.logsumexp(a, axis=0, keepdims=True), w_row)), [a])
    assert res.passed


def test_softmax_shift_invariance():
    r = rng()
    x = r.standard_normal((4, 7))
    base = T.softmax(Tensor(x), axis=1).data
    shifted = T.softmax(Tensor(x + 123.4), axis=1).data
    np.testing.assert_allclose(base, shifted, atol=1e-12)
    assert np.allclose(base.sum(axis=1), 1.0)


def test_layer_norm_gradients():
    r = rng()
    x = param64(r, (2, 3, 4, 4))
    g = Tensor(r.standard_normal((1, 3, 1, 1)), requires_grad=True)
    b = Tensor(r.standard_normal((1, 3, 1, 1)), requires_grad=True)
    res = check_gradients("layer_norm", lambda: T.tsum(T.power(T.layer_norm(x, g, b, axis=1), 2.0)), [x, g, b])
    assert res.passed


def test_conv2d_gradients():
    r = rng()
    x = param64(r, (2, 3, 6, 6))
    w = param64(r, (4, 3, 3, 3), scale=0.5)
    b = param64(r, (4,))
    res = check_gradients("conv_s1", lambda: T.tsum(T.power(T.conv2d(x, w, b, stride=1, pad=1), 2.0)), [x, w, b])
    assert res.passed
    res = check_gradients("conv_s2", lambda: T.tsum(T.power(T.conv2d(x, w, b, stride=2, pad=1), 2.0)), [x, w, b])
    assert res.passed


def test_conv_transpose_gradients():
    r = rng()
    x = param64(r, (2, 3, 4, 4))
    w = param64(r, (3, 2, 4, 4), scale=0.5)
    b = param64(r, (2,))
    res = check_gradients("tconv", lambda: T.tsum(T.power(T.conv_transpose2d(x, w, b, stride=2, pad=1), 2.0)), [x, w, b])
    assert res.passed


def test_conv_matches_direct_computation():
    r = rng()
    x = r.standard_normal((1, 2, 5, 5))
    w = r.standard_normal((3, 2, 3, 3))
    b = r.standard_normal(3)
    out = T.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2, pad=1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    for f in range(3):
        for i in range(out.shape[2]):
            for j in range(out.shape[3]):
                patch = xp[0, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3]
                expected = (patch * w[f]).sum() + b[f]
                assert abs(out[0, f, i, j] - expected) < 1e-10


def test_upsample_nearest():
    r = rng()
    x = param64(r, (1, 2, 3, 3))
    out = T.upsample_nearest(x, 2)
    assert out.shape == (1, 2, 6, 6)
    assert np.all(out.data[0, 0, :2, :2] == x.data[0, 0, 0, 0])
    res = check_gradients("upsample", lambda: T.tsum(T.power(T.upsample_nearest(x, 2), 2.0)), [x])
    assert res.passed


def test_backward_accumulates_shared_parameters():
    a = Tensor(np.asarray([2.0]), requires_grad=True)
    loss = T.tsum(T.add(T.mul(a, a), a))  # d/da (a^2 + a) = 2a + 1
    T.backward(loss)
    assert np.allclose(a.grad, [5.0])


def test_backward_twice_raises():
    a = Tensor(np.asarray([1.0]), requires_grad=True)
    loss = T.tsum(T.mul(a, a))
    T.backward(loss)
    with pytest.raises(RuntimeError):
        T.backward(loss)


def test_detached_branch_gets_zero_gradient():
    from vitac.nn import ParamStore

    a = Tensor(np.asarray([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.asarray([3.0, 4.0]), requires_grad=True)
    store = ParamStore({"a": a, "b": b})
    loss = T.tsum(T.mul(a, a))
    T.backward(loss, store=store)
    assert np.allclose(b.grad, 0.0)
    assert b.grad.shape == b.data.shape


def test_no_grad_blocks_taping():
    a = Tensor(np.asarray([1.0]), requires_grad=True)
    with T.no_grad():
        out = T.mul(a, a)
    assert not out.requires_grad and out._ctx is None


def test_forward_backward_bit_determinism():
    r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
    results = []
    for r in (r1, r2):
        x = Tensor(r.standard_normal((2, 3, 8, 8)).astype(np.float32), requires_grad=True)
        w = Tensor(r.standard_normal((4, 3, 3, 3)).astype(np.float32), requires_grad=True)
        b = Tensor(np.zeros(4, dtype=np.float32), requires_grad=True)
        out = T.tsum(T.power(T.relu(T.conv2d(x, w, b, stride=1, pad=1)), 2.0))
        T.backward(out)
        results.append((out.data.copy(), x.grad.copy(), w.grad.copy()))
    assert np.array_equal(results[0][0], results[1][0])
    assert np.array_equal(results[0][1], results[1][1])
    assert np.array_equal(results[0][2], results[1][2])
