"""Adam with bias correction, operating on a ParamStore."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ParamStore


@dataclass
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(store: ParamStore, cfg: AdamConfig):
    """One Adam update over every parameter in the store.

    Moment estimates live in the store and are created lazily on the first
    step. Gradient slots are cleared afterwards, so each step consumes exactly
    one backward pass. Parameters whose gradient is zero and whose moments are
    still zero are left bit-identical.
    """
    store.adam_t += 1
    t = store.adam_t
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name, p in store.tensors.items():
        g = p.grad
        if g is None:
            raise RuntimeError(f"adam_step: parameter {name} has no gradient; run backward(loss, store) first")
        m = store.adam_m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            store.adam_m[name] = m
            store.adam_v[name] = np.zeros_like(p.data)
        v = store.adam_v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p.data = p.data - cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    store.zero_grad()
