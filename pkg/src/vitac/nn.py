"""Network building blocks on top of the tensor tape.

Modules own their parameter Tensors directly and expose them through
``named_params()``; a :class:`ParamStore` is an ordered name -> Tensor view
over one or more modules plus the optimizer and momentum state that rides
along with those parameters. Stores are what optimizers step and what
checkpoints serialize.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

from . import tensor as T
from .tensor import Tensor


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Base class; discovers parameters and submodules from attributes."""

    def named_params(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_params(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_params(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{key}.{i}"] = item
        return out

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ParamStore:
    """Ordered map of parameter name -> Tensor, plus optimizer state.

    ``adam_m`` / ``adam_v`` / ``adam_t`` hold Adam moment estimates for these
    parameters; ``momentum`` optionally holds a name-congruent copy of the
    parameter arrays for momentum-averaged target networks.
    """

    def __init__(self, tensors: dict[str, Tensor]):
        self.tensors: dict[str, Tensor] = dict(tensors)
        self.adam_m: dict[str, np.ndarray] = {}
        self.adam_v: dict[str, np.ndarray] = {}
        self.adam_t: int = 0
        self.momentum: dict[str, np.ndarray] | None = None

    @classmethod
    def from_modules(cls, modules: dict[str, Module] | Module) -> "ParamStore":
        if isinstance(modules, Module):
            return cls(modules.named_params())
        tensors: dict[str, Tensor] = {}
        for name, mod in modules.items():
            tensors.update(mod.named_params(f"{name}."))
        return cls(tensors)

    def __len__(self):
        return len(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def init_momentum(self):
        self.momentum = {k: t.data.copy() for k, t in self.tensors.items()}

    def copy_values_from(self, other: "ParamStore"):
        _check_congruent(self.tensors, other.tensors, "copy_values_from")
        for k, t in self.tensors.items():
            t.data = other.tensors[k].data.copy()

    def astype(self, dtype):
        for t in self.tensors.values():
            t.data = t.data.astype(dtype)
        return self

    def state_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Flat name -> array view used by checkpointing (params + Adam state)."""
        out = {f"{prefix}{k}": t.data for k, t in self.tensors.items()}
        for k, v in self.adam_m.items():
            out[f"{prefix}adam_m/{k}"] = v
        for k, v in self.adam_v.items():
            out[f"{prefix}adam_v/{k}"] = v
        out[f"{prefix}adam_t"] = np.asarray([self.adam_t], dtype=np.int64)
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], prefix: str = ""):
        for k, t in self.tensors.items():
            src = arrays[f"{prefix}{k}"]
            if src.shape != t.data.shape:
                raise ValueError(f"shape mismatch loading {k}: {src.shape} vs {t.data.shape}")
            t.data = src.astype(t.data.dtype).reshape(t.data.shape).copy()
        self.adam_m = {}
        self.adam_v = {}
        for k in self.tensors:
            mk, vk = f"{prefix}adam_m/{k}", f"{prefix}adam_v/{k}"
            if mk in arrays:
                self.adam_m[k] = arrays[mk].copy()
                self.adam_v[k] = arrays[vk].copy()
        tk = f"{prefix}adam_t"
        if tk in arrays:
            self.adam_t = int(arrays[tk][0])


def _check_congruent(a: dict[str, Tensor], b: dict[str, Tensor], what: str):
    if a.keys() != b.keys():
        only_a = sorted(set(a) - set(b))[:3]
        only_b = sorted(set(b) - set(a))[:3]
        raise ValueError(f"{what}: parameter names differ (e.g. {only_a} vs {only_b})")
    for k in a:
        if a[k].data.shape != b[k].data.shape:
            raise ValueError(f"{what}: shape mismatch at {k}: {a[k].data.shape} vs {b[k].data.shape}")


def momentum_update(online: ParamStore, target: ParamStore, eta: float):
    """target <- eta * target + (1 - eta) * online, key for key."""
    _check_congruent(online.tensors, target.tensors, "momentum_update")
    for k, t in target.tensors.items():
        t.data = eta * t.data + (1.0 - eta) * online.tensors[k].data


def polyak_update(online: ParamStore, target: ParamStore, rho: float):
    """target <- (1 - rho) * target + rho * online (soft target tracking)."""
    momentum_update(online, target, 1.0 - rho)


# -- layers -------------------------------------------------------------------


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True, dtype=np.float32):
        self.w = Tensor(uniform_fan_in(rng, (n_in, n_out), n_in, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(n_out, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = T.matmul(x, self.w)
        return T.add(y, self.b) if self.b is not None else y


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator, stride: int = 1, pad: int = 0, dtype=np.float32):
        fan_in = c_in * k * k
        self.w = Tensor(uniform_fan_in(rng, (c_out, c_in, k, k), fan_in, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.pad = pad

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


class ConvTranspose2d(Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator, stride: int = 1, pad: int = 0, dtype=np.float32):
        fan_in = c_in * k * k
        self.w = Tensor(uniform_fan_in(rng, (c_in, c_out, k, k), fan_in, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.pad = pad

    def forward(self, x: Tensor) -> Tensor:
        return T.conv_transpose2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


class LayerNorm(Module):
    """Channel layer norm for NCHW maps (axis=1) or feature vectors (axis=-1)."""

    def __init__(self, channels: int, axis: int = 1, dtype=np.float32):
        shape = (1, channels, 1, 1) if axis == 1 else (channels,)
        self.g = Tensor(np.ones(shape, dtype=dtype), requires_grad=True)
        self.b = Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)
        self.axis = axis

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.g, self.b, axis=self.axis)


class ResidualBlock(Module):
    """x + conv(relu(conv(x))), both convs shape-preserving."""

    def __init__(self, channels: int, rng: np.random.Generator, k: int = 3, dtype=np.float32):
        p = k // 2
        self.c1 = Conv2d(channels, channels, k, rng, stride=1, pad=p, dtype=dtype)
        self.c2 = Conv2d(channels, channels, k, rng, stride=1, pad=p, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return T.add(x, self.c2(T.relu(self.c1(x))))


class MultiheadAttention(Module):
    """Multi-head scaled dot-product attention over token sequences.

    Query tokens come from ``x`` and key/value tokens from ``y``; both are
    (B, T, width). Projections are square, bias-free, and the head outputs are
    re-merged through a final linear map.
    """

    def __init__(self, width: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        if width % heads != 0:
            raise ValueError(f"width {width} not divisible by heads {heads}")
        self.wq = Tensor(uniform_fan_in(rng, (width, width), width, dtype), requires_grad=True)
        self.wk = Tensor(uniform_fan_in(rng, (width, width), width, dtype), requires_grad=True)
        self.wv = Tensor(uniform_fan_in(rng, (width, width), width, dtype), requires_grad=True)
        self.wo = Tensor(uniform_fan_in(rng, (width, width), width, dtype), requires_grad=True)
        self.heads = heads
        self.width = width

    def _split(self, t: Tensor, B: int, n: int) -> Tensor:
        d = self.width // self.heads
        return T.transpose(T.reshape(t, (B, n, self.heads, d)), (0, 2, 1, 3))

    def forward(self, x: Tensor, y: Tensor) -> Tensor:
        B, tq, _ = x.shape
        tk = y.shape[1]
        d = self.width // self.heads
        q = self._split(T.matmul(x, self.wq), B, tq)  # (B, h, tq, d)
        k = self._split(T.matmul(y, self.wk), B, tk)
        v = self._split(T.matmul(y, self.wv), B, tk)
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2)))  # (B, h, tq, tk)
        scores = T.mul(scores, Tensor(np.asarray(1.0 / math.sqrt(d), dtype=x.dtype)))
        att = T.softmax(scores, axis=-1)
        mixed = T.matmul(att, v)  # (B, h, tq, d)
        merged = T.reshape(T.transpose(mixed, (0, 2, 1, 3)), (B, tq, self.width))
        return T.matmul(merged, self.wo)


class MLP(Module):
    def __init__(self, dims: Iterable[int], rng: np.random.Generator, activation: Callable[[Tensor], Tensor] = T.relu, dtype=np.float32):
        dims = list(dims)
        self.layers = [Dense(a, b, rng, dtype=dtype) for a, b in zip(dims[:-1], dims[1:])]
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.activation(x)
        return x
