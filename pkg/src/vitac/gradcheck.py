"""Finite-difference verification of analytic gradients.

Every check runs in float64: the loss builder is evaluated with each
parameter element perturbed by +/- h and the central difference is compared
against the gradient produced by one backward pass. Shapes are kept small by
callers so exhaustive element-wise perturbation stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor

STEP = 1e-5
TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    n_elements: int
    passed: bool


@dataclass
class CheckReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def worst(self) -> float:
        return max((r.max_rel_err for r in self.results), default=0.0)

    def lines(self) -> list[str]:
        out = []
        for r in self.results:
            status = "ok" if r.passed else "FAIL"
            out.append(f"{status:4s} {r.name:40s} n={r.n_elements:5d} max_rel_err={r.max_rel_err:.3e}")
        return out


def _rel_err(a: np.ndarray, n: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(
    name: str,
    build_loss: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = STEP,
    tolerance: float = TOLERANCE,
) -> CheckResult:
    """Compare backward() gradients of ``build_loss()`` against central
    finite differences over every element of every tensor in ``params``.

    ``build_loss`` must rebuild the graph from scratch each call and all
    participating arrays must already be float64.
    """
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError("gradient checks require float64 parameters")
        p.grad = None
    loss = build_loss()
    T.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    for p in params:
        p.grad = None

    worst = 0.0
    n_total = 0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = build_loss().item()
            flat[i] = orig - step
            dn = build_loss().item()
            flat[i] = orig
            numeric[i] = (up - dn) / (2.0 * step)
        worst = max(worst, _rel_err(a.reshape(-1), numeric))
        n_total += flat.size
    return CheckResult(name, worst, n_total, worst < tolerance)


def param64(rng: np.random.Generator, shape, scale: float = 1.0) -> Tensor:
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def cast_params_f64(module) -> list[Tensor]:
    """Cast a module's parameters to float64 in place; returns them."""
    params = list(module.named_params().values())
    for p in params:
        p.data = p.data.astype(np.float64)
    return params


def _away_from(rng, shape, gap: float = 0.25) -> np.ndarray:
    """Standard normals pushed ``gap`` away from zero (keeps kinks FD-safe)."""
    raw = rng.standard_normal(shape)
    return np.sign(raw) * (np.abs(raw) + gap)


def op_checks(seed: int = 0) -> list[tuple]:
    """(name, build_loss, params) triples covering every differentiable op."""
    rng = np.random.default_rng(seed)
    checks = []

    def case(name):
        def wrap(fn):
            checks.append((name, fn))
            return fn
        return wrap

    a = param64(rng, (3, 4))
    b = param64(rng, (4,))
    case("add broadcast")(lambda a=a, b=b: T.tsum(T.mul(T.add(a, b), a)))
    c = param64(rng, (3, 4))
    case("sub mul")(lambda a=a, c=c: T.tsum(T.mul(T.sub(a, c), c)))
    d = Tensor(_away_from(rng, (3, 4)), requires_grad=True)
    case("div")(lambda a=a, d=d: T.tsum(T.div(a, d)))
    case("neg power")(lambda a=a: T.tsum(T.power(T.neg(a), 3)))

    m1 = param64(rng, (3, 5))
    m2 = param64(rng, (5, 2))
    case("matmul 2d")(lambda m1=m1, m2=m2: T.tsum(T.matmul(m1, m2)))
    b1 = param64(rng, (2, 3, 4))
    b2 = param64(rng, (2, 4, 5))
    case("matmul batched")(lambda b1=b1, b2=b2: T.tsum(T.matmul(b1, b2)))

    e = param64(rng, (2, 3), scale=0.5)
    case("exp")(lambda e=e: T.tsum(T.exp(e)))
    pos = Tensor(np.abs(rng.standard_normal((2, 3))) + 0.5, requires_grad=True)
    case("log sqrt")(lambda pos=pos: T.tsum(T.mul(T.log(pos), T.sqrt(pos))))
    case("tanh softplus")(lambda e=e: T.tsum(T.mul(T.tanh(e), T.softplus(e))))

    r = Tensor(_away_from(rng, (3, 4)), requires_grad=True)
    case("relu")(lambda r=r: T.tsum(T.mul(T.relu(r), r)))
    x1 = Tensor(_away_from(rng, (3, 3)), requires_grad=True)
    x2 = Tensor(-_away_from(rng, (3, 3)), requires_grad=True)
    case("maximum minimum")(
        lambda x1=x1, x2=x2: T.tsum(T.add(T.maximum(x1, x2), T.minimum(x1, x2))))
    interior = Tensor(np.tanh(rng.standard_normal((3, 4))) * 1.5, requires_grad=True)
    case("clip interior")(lambda t=interior: T.tsum(T.mul(T.clip(t, -2.0, 2.0), t)))

    s = param64(rng, (2, 5))
    case("tsum keepdims")(lambda s=s: T.tsum(T.mul(T.tsum(s, axis=1, keepdims=True), s)))
    case("tmean")(lambda s=s: T.tsum(T.mul(T.tmean(s, axis=0), T.tmean(s, axis=0))))
    case("logsumexp")(lambda s=s: T.tsum(T.logsumexp(s, axis=-1)))
    case("softmax")(lambda s=s: T.tsum(T.mul(T.softmax(s, axis=-1), s)))

    g = param64(rng, (2, 3, 4))
    w = param64(rng, (24,))
    case("reshape transpose")(
        lambda g=g, w=w: T.tsum(T.mul(T.reshape(T.transpose(g, (1, 0, 2)), (24,)), w)))
    c1 = param64(rng, (2, 3))
    c2 = param64(rng, (2, 2))
    case("concat")(lambda c1=c1, c2=c2: T.tsum(T.power(T.concat([c1, c2], axis=1), 2)))

    ln_x = param64(rng, (2, 3, 4))
    ln_g = Tensor(np.ones((1, 3, 1)) + 0.1 * rng.standard_normal((1, 3, 1)), requires_grad=True)
    ln_b = param64(rng, (1, 3, 1), scale=0.1)
    case("layer_norm")(
        lambda x=ln_x, g0=ln_g, b0=ln_b: T.tsum(T.mul(T.layer_norm(x, g0, b0, axis=1), x)))
    nr = param64(rng, (3, 4))
    case("normalize_rows")(lambda nr=nr: T.tsum(T.mul(T.normalize_rows(nr), nr)))
    ma = param64(rng, (2, 3))
    mb = param64(rng, (2, 3))
    case("mse")(lambda ma=ma, mb=mb: T.mse(ma, mb))

    cx = param64(rng, (1, 2, 6, 6), scale=0.5)
    cw = param64(rng, (3, 2, 3, 3), scale=0.5)
    cb = param64(rng, (3,), scale=0.1)
    case("conv2d k3 s1 p1")(lambda x=cx, w=cw, b=cb: T.tsum(T.power(T.conv2d(x, w, b, 1, 1), 2)))
    case("conv2d k3 s2 p1")(lambda x=cx, w=cw, b=cb: T.tsum(T.power(T.conv2d(x, w, b, 2, 1), 2)))
    cw5 = param64(rng, (2, 2, 5, 5), scale=0.3)
    cb5 = param64(rng, (2,), scale=0.1)
    cx8 = param64(rng, (1, 2, 8, 8), scale=0.5)
    case("conv2d k5 s4 p2")(lambda x=cx8, w=cw5, b=cb5: T.tsum(T.power(T.conv2d(x, w, b, 4, 2), 2)))
    w11 = param64(rng, (4, 2, 1, 1), scale=0.5)
    b11 = param64(rng, (4,), scale=0.1)
    case("conv2d 1x1 fast path")(lambda x=cx, w=w11, b=b11: T.tsum(T.power(T.conv2d(x, w, b), 2)))
    tw = param64(rng, (2, 3, 4, 4), scale=0.3)
    tb = param64(rng, (3,), scale=0.1)
    tx = param64(rng, (1, 2, 3, 3), scale=0.5)
    case("conv_transpose2d k4 s2 p1")(
        lambda x=tx, w=tw, b=tb: T.tsum(T.power(T.conv_transpose2d(x, w, b, 2, 1), 2)))
    ux = param64(rng, (1, 2, 3, 3))
    case("upsample_nearest")(lambda x=ux: T.tsum(T.power(T.upsample_nearest(x, 2), 2)))

    return checks


def composed_checks(seed: int = 0) -> list[tuple]:
    """Small end-to-end graphs mirroring the real network shapes."""
    from .nn import MLP, Dense, MultiheadAttention
    from .vtcon import GaussianActor, QNet, infonce_bidirectional

    rng = np.random.default_rng(seed + 1)
    checks = []

    def jitter_biases(params):
        # zero-init biases can park a relu input exactly on its kink, where
        # finite differences are meaningless; nudge them off it
        for p in params:
            if p.data.ndim == 1:
                p.data = p.data + 0.05 * rng.standard_normal(p.data.shape)
        return params

    # cross-attention block: learned query tokens attend into a token grid
    att = MultiheadAttention(4, 2, rng, dtype=np.float64)
    att_params = list(att.named_params().values())
    tok_q = param64(rng, (1, 3, 4), scale=0.5)
    tok_kv = param64(rng, (1, 5, 4), scale=0.5)
    checks.append((
        "cross attention",
        lambda: T.tsum(T.power(att(tok_q, tok_kv), 2)),
        [*att_params, tok_q, tok_kv],
    ))

    # conv trunk -> tokens -> attention fusion -> dense head (encoder shape)
    cw1 = param64(rng, (4, 6, 3, 3), scale=0.3)
    cb1 = param64(rng, (4,), scale=0.1)
    lng = Tensor(np.ones((1, 4, 1, 1)), requires_grad=True)
    lnb = param64(rng, (1, 4, 1, 1), scale=0.1)
    fuse = MultiheadAttention(4, 2, rng, dtype=np.float64)
    head = Dense(16, 3, rng, dtype=np.float64)
    xin = param64(rng, (1, 6, 4, 4), scale=0.5)
    tac_tok = param64(rng, (1, 4, 4), scale=0.5)

    def encoder_fusion_loss():
        fmap = T.relu(T.layer_norm(T.conv2d(xin, cw1, cb1, 2, 1), lng, lnb, axis=1))
        tok = T.transpose(T.reshape(fmap, (1, 4, 4)), (0, 2, 1))
        fused = fuse(tok, tac_tok)
        out = head(T.reshape(fused, (1, 16)))
        return T.tsum(T.power(out, 2))

    checks.append((
        "encoder + fusion + head",
        encoder_fusion_loss,
        [cw1, cb1, lng, lnb, xin, tac_tok,
         *fuse.named_params().values(), *head.named_params().values()],
    ))

    # decoder shape: tconv -> upsample -> 1x1 head
    dw = param64(rng, (3, 2, 4, 4), scale=0.3)
    db = param64(rng, (2,), scale=0.1)
    hw = param64(rng, (1, 2, 1, 1), scale=0.5)
    hb = param64(rng, (1,), scale=0.1)
    din = param64(rng, (1, 3, 2, 2), scale=0.5)
    target = Tensor(rng.standard_normal((1, 1, 8, 8)) * 0.1)
    checks.append((
        "decoder stack",
        lambda: T.mse(T.conv2d(T.upsample_nearest(T.conv_transpose2d(din, dw, db, 2, 1), 2), hw, hb), target),
        [dw, db, hw, hb, din],
    ))

    # squashed-Gaussian policy log-density with a frozen noise draw
    actor = GaussianActor(5, 2, rng, hidden=6)
    actor_params = jitter_biases(cast_params_f64(actor))
    obs = param64(rng, (3, 5), scale=0.5)
    eps = Tensor(rng.standard_normal((3, 2)))

    def actor_loss():
        mu, log_std = actor(obs)
        u = mu + T.exp(log_std) * eps
        action = T.tanh(u)
        logp = (eps * eps * Tensor(np.asarray(-0.5)) - log_std).sum(axis=1, keepdims=True)
        squash = ((Tensor(np.asarray(np.log(2.0))) - u - T.softplus(u * Tensor(np.asarray(-2.0))))
                  * Tensor(np.asarray(2.0))).sum(axis=1, keepdims=True)
        return T.tmean(T.sub(logp, squash)) + T.tmean(action)

    checks.append(("squashed gaussian actor", actor_loss, [*actor_params, obs]))

    # twin-critic regression
    q = QNet(5, 2, rng, hidden=6)
    q_params = jitter_biases(cast_params_f64(q))
    qo = param64(rng, (3, 5), scale=0.5)
    qa = param64(rng, (3, 2), scale=0.5)
    qt = Tensor(rng.standard_normal((3, 1)))
    checks.append(("critic regression", lambda: T.mse(q(qo, qa), qt), [*q_params, qo, qa]))

    # proprioception MLP
    mlp = MLP([4, 6, 3], rng, dtype=np.float64)
    mlp_params = jitter_biases(list(mlp.named_params().values()))
    pin = param64(rng, (2, 4), scale=0.5)
    checks.append(("proprio mlp", lambda: T.tsum(T.power(mlp(pin), 2)), [*mlp_params, pin]))

    # contrastive objectives on raw (pre-normalization) features
    fv = param64(rng, (3, 4), scale=0.7)
    fc = param64(rng, (3, 4), scale=0.7)
    mv = Tensor(rng.standard_normal((3, 4)))
    mc = Tensor(rng.standard_normal((3, 4)))

    def nce(variant):
        def loss():
            _, _, l = infonce_bidirectional(
                T.normalize_rows(fv), T.normalize_rows(fc), mv, mc,
                temperature=0.5, variant=variant)
            return l
        return loss

    checks.append(("infonce verbatim", nce("verbatim-moco"), [fv, fc]))
    checks.append(("infonce standard", nce("standard-infonce"), [fv, fc]))

    return checks


def full_suite(seed: int = 0, log=None) -> CheckReport:
    """Every op and composed-graph check in float64; used by the CLI."""
    report = CheckReport()
    for item in op_checks(seed) + composed_checks(seed):
        if len(item) == 2:
            name, build = item
            loss = build()
            params = _graph_leaves(loss)
        else:
            name, build, params = item
            loss = None
        result = check_gradients(name, build, params)
        report.results.append(result)
        if log:
            log(report.lines()[-1])
    return report


def _graph_leaves(loss: Tensor) -> list[Tensor]:
    """Collect requires-grad leaves reachable from ``loss``."""
    leaves, seen, stack = [], set(), [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node._ctx is None:
            if node.requires_grad:
                leaves.append(node)
        else:
            stack.extend(node._ctx[1])
    return leaves
