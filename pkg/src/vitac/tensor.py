"""Reverse-mode automatic differentiation on numpy arrays.

A ``Tensor`` wraps an ndarray together with an optional gradient slot and a
record of how it was produced. Operations build a tape implicitly; calling
:func:`backward` on a scalar loss walks the tape once in reverse topological
order and accumulates ``d loss / d node`` into every node that requires a
gradient. The tape is consumed by the walk, so a second backward through the
same graph is a usage error and raises.

Arrays keep whatever dtype they are given. Training code runs float32;
gradient checks cast parameters to float64 first.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np

_grad_enabled = True

_CONSUMED = object()


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (target nets, rollouts)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_ctx")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._ctx = None  # (backward_fn, parents) for interior nodes

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def backward(self, store=None):
        backward(self, store=store)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _node(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    """Create an interior tape node, or a plain leaf when grads are off."""
    if _grad_enabled and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._ctx = (backward_fn, tuple(parents))
        return out
    return Tensor(data)


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor, store=None):
    """Backpropagate from a scalar ``loss`` through the recorded tape.

    Gradients accumulate into ``.grad`` of every reachable tensor that
    requires one. When ``store`` (a ParamStore) is given, its parameters
    that did not participate in the graph get explicit zero gradients, so
    optimizer steps see a full gradient vector.
    """
    if loss._ctx is _CONSUMED:
        raise RuntimeError("backward called twice on an already-consumed tape")
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.shape}")

    # Iterative topological sort; graphs can be deep for stacked networks.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None and node._ctx is not _CONSUMED:
            for p in node._ctx[1]:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        ctx = node._ctx
        if ctx is None or ctx is _CONSUMED:
            continue
        ctx[0](node.grad)
        node._ctx = _CONSUMED
        if node is not loss:
            node.grad = None  # interior grads are scratch; free eagerly

    if store is not None:
        for t in store.tensors.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)


# -- elementwise arithmetic ---------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _node(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data

    def bw(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _node(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    def bw(g):
        _accumulate(a, -g)

    return _node(-a.data, (a,), bw)


def power(a: Tensor, p: float) -> Tensor:
    out = a.data**p

    def bw(g):
        _accumulate(a, g * p * a.data ** (p - 1))

    return _node(out, (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    return power(a, 0.5)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def bw(g):
        _accumulate(a, g * out)

    return _node(out, (a,), bw)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def bw(g):
        _accumulate(a, g / a.data)

    return _node(out, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bw(g):
        _accumulate(a, g * (1.0 - out * out))

    return _node(out, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def bw(g):
        _accumulate(a, g * (a.data > 0))

    return _node(out, (a,), bw)


def softplus(a: Tensor) -> Tensor:
    # log(1 + exp(x)) computed without overflow for large |x|
    out = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def bw(g):
        sig = 1.0 / (1.0 + np.exp(-a.data))
        _accumulate(a, g * sig)

    return _node(out, (a,), bw)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)

    def bw(g):
        _accumulate(a, g * ((a.data > lo) & (a.data < hi)))

    return _node(out, (a,), bw)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError("minimum expects matching shapes")
    mask = a.data <= b.data
    out = np.where(mask, a.data, b.data)

    def bw(g):
        _accumulate(a, g * mask)
        _accumulate(b, g * ~mask)

    return _node(out, (a, b), bw)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError("maximum expects matching shapes")
    mask = a.data >= b.data
    out = np.where(mask, a.data, b.data)

    def bw(g):
        _accumulate(a, g * mask)
        _accumulate(b, g * ~mask)

    return _node(out, (a, b), bw)


# -- reductions ---------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _node(out, (a,), bw)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size / out.size

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        _accumulate(a, np.broadcast_to(g, a.data.shape) / n)

    return _node(out, (a,), bw)


# -- shape manipulation ---------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape

    def bw(g):
        _accumulate(a, g.reshape(old))

    return _node(a.data.reshape(shape), (a,), bw)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        _accumulate(a, g.transpose(inv))

    return _node(a.data.transpose(axes), (a,), bw)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = list(tensors)
    sizes = [t.data.shape[axis] for t in ts]
    out = np.concatenate([t.data for t in ts], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _node(out, tuple(ts), bw)


# -- linear algebra -------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. Supports 2D x 2D, ND x 2D, and batched ND x ND with
    identical leading batch dimensions."""
    ad, bd = a.data, b.data
    if ad.ndim >= 2 and bd.ndim == 2:
        out = ad @ bd

        def bw(g):
            if a.requires_grad:
                _accumulate(a, g @ bd.T)
            if b.requires_grad:
                k, n = bd.shape
                _accumulate(b, ad.reshape(-1, k).T @ g.reshape(-1, n))

        return _node(out, (a, b), bw)
    if ad.shape[:-2] != bd.shape[:-2]:
        raise ValueError(f"matmul batch dims differ: {ad.shape} vs {bd.shape}")
    out = ad @ bd

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g @ bd.swapaxes(-1, -2))
        if b.requires_grad:
            _accumulate(b, ad.swapaxes(-1, -2) @ g)

    return _node(out, (a, b), bw)


# -- softmax family -------------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _accumulate(a, out * (g - dot))

    return _node(out, (a,), bw)


def logsumexp(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = m + np.log(s)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def bw(g):
        g = np.asarray(g)
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, g * (e / s))

    return _node(out, (a,), bw)


# -- normalization ---------------------------------------------------------------


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, axis: int = 1, eps: float = 1e-5) -> Tensor:
    """Normalize over one axis, then scale and shift.

    ``gamma`` and ``beta`` must broadcast against ``x`` (for NCHW feature maps
    with axis=1 they are shaped (1, C, 1, 1))."""
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def bw(g):
        if gamma.requires_grad:
            _accumulate(gamma, _unbroadcast(g * xhat, gamma.data.shape))
        if beta.requires_grad:
            _accumulate(beta, _unbroadcast(g, beta.data.shape))
        if x.requires_grad:
            gg = g * gamma.data
            m1 = gg.mean(axis=axis, keepdims=True)
            m2 = (gg * xhat).mean(axis=axis, keepdims=True)
            _accumulate(x, inv * (gg - m1 - xhat * m2))

    return _node(out, (x, gamma, beta), bw)


# -- convolution family -----------------------------------------------------------


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(B, C, Hp, Wp) -> (B*oH*oW, C*kh*kw) patch matrix (contiguous copy)."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (B, C, oH, oW, kh, kw)
    b, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols)


def _col2im(dcols: np.ndarray, xp_shape, kh, kw, stride, oh, ow) -> np.ndarray:
    """Scatter-add patch gradients back onto the padded input."""
    b, c = xp_shape[0], xp_shape[1]
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    d6 = dcols.reshape(b, oh, ow, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += d6[:, :, :, :, i, j]
    return dxp


def _conv2d_1x1(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    # pointwise conv is a plain GEMM over the channel axis; skip im2col
    B, C, H, W = x.data.shape
    F = w.data.shape[0]
    wmat = w.data.reshape(F, C)
    xmat = x.data.reshape(B, C, H * W)
    out = np.einsum("fc,bcs->bfs", wmat, xmat, optimize=True).reshape(B, F, H, W)
    out += b.data.reshape(1, F, 1, 1)

    def bw(g):
        if b.requires_grad:
            _accumulate(b, g.sum(axis=(0, 2, 3)))
        gmat = g.reshape(B, F, H * W)
        if w.requires_grad:
            dw = np.einsum("bfs,bcs->fc", gmat, xmat, optimize=True)
            _accumulate(w, dw.reshape(w.data.shape))
        if x.requires_grad:
            dx = np.einsum("fc,bfs->bcs", wmat, gmat, optimize=True)
            _accumulate(x, dx.reshape(B, C, H, W))

    return _node(out, (x, w, b), bw)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2D convolution, NCHW layout, weight (F, C, kh, kw), bias (F,)."""
    B, C, H, W = x.data.shape
    F, Cw, kh, kw = w.data.shape
    if Cw != C:
        raise ValueError(f"conv2d channel mismatch: input {C}, weight {Cw}")
    if kh == 1 and kw == 1 and stride == 1 and pad == 0:
        return _conv2d_1x1(x, w, b)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    oh = (H + 2 * pad - kh) // stride + 1
    ow = (W + 2 * pad - kw) // stride + 1
    cols = _im2col(xp, kh, kw, stride)
    wmat = w.data.reshape(F, -1)
    out = cols @ wmat.T
    out += b.data
    out = out.reshape(B, oh, ow, F).transpose(0, 3, 1, 2)

    def bw(g):
        gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, F)
        if b.requires_grad:
            _accumulate(b, gmat.sum(axis=0))
        if w.requires_grad:
            _accumulate(w, (gmat.T @ cols).reshape(w.data.shape))
        if x.requires_grad:
            dcols = gmat @ wmat
            dxp = _col2im(dcols, xp.shape, kh, kw, stride, oh, ow)
            dx = dxp[:, :, pad : pad + H, pad : pad + W] if pad else dxp
            _accumulate(x, dx)

    return _node(out, (x, w, b), bw)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Transposed 2D convolution, weight (C_in, F, kh, kw).

    Output spatial size is (in - 1) * stride + k - 2 * pad; the forward pass is
    exactly the gradient of conv2d with the same geometry."""
    B, C, h, w_in = x.data.shape
    Cw, F, kh, kw = w.data.shape
    if Cw != C:
        raise ValueError(f"conv_transpose2d channel mismatch: input {C}, weight {Cw}")
    Ho = (h - 1) * stride + kh - 2 * pad
    Wo = (w_in - 1) * stride + kw - 2 * pad
    xmat = np.ascontiguousarray(x.data.transpose(0, 2, 3, 1)).reshape(-1, C)
    wmat = w.data.reshape(C, -1)
    cols = xmat @ wmat  # (B*h*w, F*kh*kw)
    out_pad = _col2im(cols, (B, F, Ho + 2 * pad, Wo + 2 * pad), kh, kw, stride, h, w_in)
    out = out_pad[:, :, pad : pad + Ho, pad : pad + Wo] if pad else out_pad
    out = out + b.data.reshape(1, F, 1, 1)

    def bw(g):
        if b.requires_grad:
            _accumulate(b, g.sum(axis=(0, 2, 3)))
        gp = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else g
        gcols = _im2col(gp, kh, kw, stride)  # (B*h*w, F*kh*kw)
        if w.requires_grad:
            _accumulate(w, (xmat.T @ gcols).reshape(w.data.shape))
        if x.requires_grad:
            dx = (gcols @ wmat.T).reshape(B, h, w_in, C).transpose(0, 3, 1, 2)
            _accumulate(x, dx)

    return _node(out, (x, w, b), bw)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    B, C, H, W = x.data.shape
    out = x.data.repeat(factor, axis=2).repeat(factor, axis=3)

    def bw(g):
        _accumulate(x, g.reshape(B, C, H, factor, W, factor).sum(axis=(3, 5)))

    return _node(out, (x,), bw)


# -- convenience composites --------------------------------------------------------


def mse(a: Tensor, b: Tensor) -> Tensor:
    d = sub(a, b)
    return tmean(mul(d, d))


def normalize_rows(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Scale each row of (B, D) to unit Euclidean norm."""
    sq = tsum(mul(x, x), axis=1, keepdims=True)
    return div(x, power(add(sq, Tensor(np.asarray(eps, dtype=x.dtype))), 0.5))
