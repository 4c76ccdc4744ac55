"""Layer semantics, parameter stores, Adam, and checkpoint round-trips."""

import numpy as np
import pytest

from vitac import checkpoint
from vitac import tensor as T
from vitac.gradcheck import cast_params_f64, check_gradients
from vitac.nn import (
    MLP,
    Conv2d,
    Dense,
    LayerNorm,
    Module,
    MultiheadAttention,
    ParamStore,
    ResidualBlock,
    momentum_update,
    polyak_update,
)
from vitac.optim import AdamConfig, adam_step
from vitac.tensor import Tensor


def rng(seed=0):
    return np.random.default_rng(seed)


def test_module_param_discovery_and_order():
    class Net(Module):
        def __init__(self, r):
            self.enc = Dense(3, 4, r)
            self.blocks = [ResidualBlock(2, r), ResidualBlock(2, r)]
            self.scale = Tensor(np.ones(1, dtype=np.float32), requires_grad=True)

    net = Net(rng())
    names = list(net.named_params())
    assert names[0] == "enc.w"
    assert "blocks.0.c1.w" in names and "blocks.1.c2.b" in names
    assert names[-1] == "scale"
    # insertion order is stable across identical construction
    assert names == list(Net(rng()).named_params())


def test_param_store_congruence_checks():
    a = ParamStore({"x": Tensor(np.zeros((2, 2)), requires_grad=True)})
    b = ParamStore({"y": Tensor(np.zeros((2, 2)), requires_grad=True)})
    with pytest.raises(ValueError):
        momentum_update(a, b, 0.9)
    c = ParamStore({"x": Tensor(np.zeros((3, 2)), requires_grad=True)})
    with pytest.raises(ValueError):
        momentum_update(a, c, 0.9)


def test_momentum_update_is_geometric_contraction():
    r = rng(3)
    online = ParamStore({"w": Tensor(r.standard_normal((8, 8)), requires_grad=True)})
    target = ParamStore({"w": Tensor(r.standard_normal((8, 8)), requires_grad=True)})
    eta = 0.99
    gaps = []
    for _ in range(5):
        gaps.append(np.linalg.norm(target.tensors["w"].data - online.tensors["w"].data))
        momentum_update(online, target, eta)
    ratios = np.diff(-np.log(gaps))
    np.testing.assert_allclose(np.exp(-np.asarray(gaps[1:]) * 0), 1.0)  # sanity on shapes
    for g0, g1 in zip(gaps[:-1], gaps[1:]):
        assert abs(g1 / g0 - eta) < 1e-9


def test_momentum_update_eta_zero_copies():
    r = rng(4)
    online = ParamStore({"w": Tensor(r.standard_normal((4, 4)), requires_grad=True)})
    target = ParamStore({"w": Tensor(r.standard_normal((4, 4)), requires_grad=True)})
    momentum_update(online, target, 0.0)
    np.testing.assert_array_equal(target.tensors["w"].data, online.tensors["w"].data)


def test_polyak_update_stays_on_segment():
    online = ParamStore({"w": Tensor(np.full((3,), 2.0), requires_grad=True)})
    target = ParamStore({"w": Tensor(np.full((3,), 1.0), requires_grad=True)})
    polyak_update(online, target, 0.005)
    v = target.tensors["w"].data
    assert np.all(v >= 1.0) and np.all(v <= 2.0)
    np.testing.assert_allclose(v, 1.0 + 0.005 * 1.0)


def test_adam_first_step_is_signed_lr():
    p = Tensor(np.asarray([1.0, -1.0, 0.5], dtype=np.float64), requires_grad=True)
    store = ParamStore({"p": p})
    before = p.data.copy()
    loss = T.tsum(T.mul(p, Tensor(np.asarray([3.0, -2.0, 0.1]))))
    T.backward(loss, store=store)
    cfg = AdamConfig(lr=1e-4)
    adam_step(store, cfg)
    delta = p.data - before
    np.testing.assert_allclose(delta, -cfg.lr * np.sign([3.0, -2.0, 0.1]), rtol=1e-3)
    assert p.grad is None  # cleared by the step


def test_adam_zero_gradient_leaves_parameter_unchanged():
    p = Tensor(np.asarray([1.0, 2.0]), requires_grad=True)
    q = Tensor(np.asarray([3.0]), requires_grad=True)
    store = ParamStore({"p": p, "q": q})
    loss = T.tsum(T.mul(q, q))
    T.backward(loss, store=store)
    before = p.data.copy()
    adam_step(store, AdamConfig())
    np.testing.assert_array_equal(p.data, before)


def test_adam_requires_gradients():
    store = ParamStore({"p": Tensor(np.zeros(2), requires_grad=True)})
    with pytest.raises(RuntimeError):
        adam_step(store, AdamConfig())


def test_dense_and_mlp_gradients():
    r = rng(5)
    mlp = MLP([3, 5, 2], r)
    params = cast_params_f64(mlp)
    x = Tensor(r.standard_normal((4, 3)))
    res = check_gradients("mlp", lambda: T.tsum(T.power(mlp(x), 2.0)), params)
    assert res.passed, res.max_rel_err


def test_residual_block_zero_init_is_identity():
    r = rng(6)
    block = ResidualBlock(3, r)
    for t in block.named_params().values():
        t.data = np.zeros_like(t.data)
    x = Tensor(r.standard_normal((2, 3, 5, 5)).astype(np.float32))
    np.testing.assert_array_equal(block(x).data, x.data)


def test_layer_norm_normalizes_channel_axis():
    r = rng(7)
    ln = LayerNorm(6, axis=1)
    x = Tensor(r.standard_normal((2, 6, 3, 3)).astype(np.float32) * 5 + 2)
    y = ln(x).data
    np.testing.assert_allclose(y.mean(axis=1), 0.0, atol=1e-5)
    np.testing.assert_allclose(y.std(axis=1), 1.0, atol=1e-3)


def test_attention_shapes_and_head_divisibility():
    r = rng(8)
    with pytest.raises(ValueError):
        MultiheadAttention(10, 4, r)
    att = MultiheadAttention(16, 8, r)
    x = Tensor(r.standard_normal((2, 5, 16)).astype(np.float32))
    y = Tensor(r.standard_normal((2, 9, 16)).astype(np.float32))
    assert att(x, y).shape == (2, 5, 16)


def test_attention_gradients():
    r = rng(9)
    att = MultiheadAttention(8, 2, r)
    params = cast_params_f64(att)
    x = Tensor(r.standard_normal((2, 3, 8)))
    y = Tensor(r.standard_normal((2, 4, 8)))
    res = check_gradients("attention", lambda: T.tsum(T.power(att(x, y), 2.0)), params)
    assert res.passed, res.max_rel_err


def test_checkpoint_round_trip_byte_exact(tmp_path):
    r = rng(10)
    arrays = {
        "conv.w": r.standard_normal((4, 3, 3, 3)).astype(np.float32),
        "frames": (r.uniform(0, 255, (5, 8, 8))).astype(np.uint8),
        "steps": np.asarray([123], dtype=np.int64),
    }
    path = tmp_path / "state.vtac"
    checkpoint.save(path, arrays)
    first = path.read_bytes()
    loaded = checkpoint.loads(first)
    assert list(loaded) == list(arrays)
    for k in arrays:
        np.testing.assert_array_equal(loaded[k], arrays[k])
        assert loaded[k].dtype == arrays[k].dtype
    checkpoint.save(path, loaded)
    assert path.read_bytes() == first


def test_checkpoint_rejects_corrupt_blobs():
    blob = checkpoint.dumps({"a": np.zeros(3, dtype=np.float32)})
    with pytest.raises(ValueError):
        checkpoint.loads(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        checkpoint.loads(blob + b"junk")


def test_store_state_arrays_round_trip_with_adam():
    r = rng(11)
    net = MLP([2, 3, 1], r)
    store = ParamStore.from_modules(net)
    x = Tensor(r.standard_normal((4, 2)).astype(np.float32))
    loss = T.tsum(T.power(net(x), 2.0))
    T.backward(loss, store=store)
    adam_step(store, AdamConfig(lr=1e-3))
    blob = checkpoint.dumps(store.state_arrays("net/"))

    net2 = MLP([2, 3, 1], rng(99))
    store2 = ParamStore.from_modules(net2)
    store2.load_state_arrays(checkpoint.loads(blob), "net/")
    assert store2.adam_t == 1
    for k in store.tensors:
        np.testing.assert_array_equal(store2.tensors[k].data, store.tensors[k].data)
        np.testing.assert_array_equal(store2.adam_m[k], store.adam_m[k])


def test_seeded_init_is_deterministic():
    a = Conv2d(3, 4, 3, rng(42))
    b = Conv2d(3, 4, 3, rng(42))
    np.testing.assert_array_equal(a.w.data, b.w.data)
