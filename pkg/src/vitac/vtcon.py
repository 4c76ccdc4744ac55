"""Contrastive visual-tactile reinforcement learning.

Two structurally identical conv encoders embed the visual and tactile frame
stacks. Momentum copies of both encoders provide contrastive keys; the
bidirectional InfoNCE objective pairs each online visual feature with its
momentum tactile counterpart (and vice versa), with the positive pair
excluded from the denominator in the default "verbatim-moco" variant and a
"standard-infonce" switch for comparison.

Feature maps are fused as token grids (attention with visual queries and
tactile keys/values by default; addition and concatenation as ablations),
concatenated with MLP-processed proprioception, and drive a SAC learner:
twin critics with Polyak-averaged target heads, a tanh-squashed Gaussian
actor, and a learned entropy temperature. After each SAC update the
contrastive loss is recomputed on the batch and backpropagated into both
encoders, then the momentum encoders are updated.

Update order per step: critic, actor (on detached features), temperature,
Polyak, contrastive, momentum. Encoder convolutions receive gradients from
the critic and contrastive losses, never from the actor loss. Target Q values
reuse the online encoders under no-grad; only critic heads keep Polyak
copies.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .nn import (
    Dense,
    LayerNorm,
    MLP,
    Module,
    MultiheadAttention,
    ParamStore,
    momentum_update,
    polyak_update,
)
from .optim import AdamConfig, adam_step
from .replay import ReplayBuffer
from .tensor import Tensor, no_grad
from .vtgen import TouchGenerator, generate, stack_to_input
from .world import Observation, PushWorld, WorldConfig

FUSIONS = ("attention", "add", "concat")
CONTRASTIVE_MODES = ("none", "standard-infonce", "verbatim-moco")
TOUCH_SOURCES = ("gt", "generated", "none")

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))
_LOG_2 = float(np.log(2.0))


def _c(value, dtype) -> Tensor:
    # constants adopt the graph dtype; bare python floats would promote f32 to f64
    return Tensor(np.asarray(value, dtype=dtype))


@dataclass
class AgentConfig:
    image_size: int = 64
    frame_stack: int = 3
    token_width: int = 64
    feature_dim: int = 128
    heads: int = 8
    hidden: int = 256
    proprio_dims: tuple = (64, 32)
    fusion: str = "attention"
    touch: str = "gt"
    contrastive: str = "verbatim-moco"
    contrastive_weight: float = 1.0
    temperature: float = 0.1
    eta: float = 0.99
    gamma: float = 0.99
    polyak: float = 0.005
    lr: float = 1e-4
    batch_size: int = 64
    buffer_capacity: int = 20_000
    warmup_steps: int = 1_000
    update_every: int = 1
    target_entropy: float = -2.0

    def __post_init__(self):
        if self.fusion not in FUSIONS:
            raise ValueError(f"fusion must be one of {FUSIONS}, got {self.fusion!r}")
        if self.contrastive not in CONTRASTIVE_MODES:
            raise ValueError(f"contrastive must be one of {CONTRASTIVE_MODES}, got {self.contrastive!r}")
        if self.touch not in TOUCH_SOURCES:
            raise ValueError(f"touch must be one of {TOUCH_SOURCES}, got {self.touch!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def tactile_to_input(stacks: np.ndarray) -> np.ndarray:
    """(B, N, H, W) or (N, H, W) tactile stack -> (B, 3N, H, W), frames tiled to 3 channels."""
    arr = np.asarray(stacks)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise ValueError(f"expected (B,N,H,W) tactile stack, got {np.asarray(stacks).shape}")
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / 255.0
    arr = arr.astype(np.float32, copy=False)
    b, n, h, w = arr.shape
    return np.repeat(arr[:, :, None], 3, axis=2).reshape(b, 3 * n, h, w)


class ConvEncoder(Module):
    """Conv trunk over a channel-concatenated frame stack plus a contrastive head.

    ``forward`` yields the (B, width, s, s) feature map; ``tokens`` reshapes it
    to a (B, s*s, width) grid for fusion; ``project`` flattens and maps to a
    unit-normalized contrastive feature vector.
    """

    def __init__(self, rng: np.random.Generator, c_in: int = 9, image_size: int = 64,
                 width: int = 64, feature_dim: int = 128):
        if image_size % 16 != 0:
            raise ValueError("image_size must be divisible by 16")
        self.c1 = Conv2dBlock(c_in, 16, 5, rng, stride=4, pad=2)
        self.c2 = Conv2dBlock(16, 32, 3, rng, stride=2, pad=1)
        self.c3 = Conv2dBlock(32, width, 3, rng, stride=2, pad=1)
        self.side = image_size // 16
        self.width = width
        self.proj = Dense(width * self.side * self.side, feature_dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.c3(self.c2(self.c1(x)))

    def tokens(self, fmap: Tensor) -> Tensor:
        b = fmap.shape[0]
        flat = T.reshape(fmap, (b, self.width, self.side * self.side))
        return T.transpose(flat, (0, 2, 1))

    def project(self, fmap: Tensor) -> Tensor:
        b = fmap.shape[0]
        return T.normalize_rows(self.proj(T.reshape(fmap, (b, -1))))

    def trunk_params(self, prefix: str = "") -> dict[str, Tensor]:
        return {k: v for k, v in self.named_params(prefix).items() if ".proj." not in f".{k}."}


class Conv2dBlock(Module):
    """conv -> channel layer norm -> relu."""

    def __init__(self, c_in, c_out, k, rng, stride=1, pad=0):
        from .nn import Conv2d

        self.conv = Conv2d(c_in, c_out, k, rng, stride=stride, pad=pad)
        self.norm = LayerNorm(c_out)

    def forward(self, x: Tensor) -> Tensor:
        return T.relu(self.norm(self.conv(x)))


class AttentionFusion(Module):
    """Cross-attention fusion: visual tokens query tactile keys/values."""

    def __init__(self, width: int, heads: int, rng: np.random.Generator):
        self.att = MultiheadAttention(width, heads, rng)

    def forward(self, tok_v: Tensor, tok_c: Tensor) -> Tensor:
        fused = self.att(tok_v, tok_c)
        b, t, w = fused.shape
        return T.reshape(fused, (b, t * w))


class AddFusion(Module):
    def forward(self, tok_v: Tensor, tok_c: Tensor) -> Tensor:
        fused = T.add(tok_v, tok_c)
        b, t, w = fused.shape
        return T.reshape(fused, (b, t * w))


class ConcatFusion(Module):
    def forward(self, tok_v: Tensor, tok_c: Tensor) -> Tensor:
        b, t, w = tok_v.shape
        return T.concat([T.reshape(tok_v, (b, t * w)), T.reshape(tok_c, (b, t * w))], axis=1)


def make_fusion(kind: str, width: int, heads: int, rng) -> Module:
    if kind == "attention":
        return AttentionFusion(width, heads, rng)
    if kind == "add":
        return AddFusion()
    if kind == "concat":
        return ConcatFusion()
    raise ValueError(f"unknown fusion {kind!r}")


def fusion_output_dim(kind: str, tokens: int, width: int) -> int:
    return 2 * tokens * width if kind == "concat" else tokens * width


def infonce_bidirectional(
    f_v: Tensor, f_c: Tensor, m_v: Tensor, m_c: Tensor,
    temperature: float = 0.1, variant: str = "verbatim-moco",
) -> tuple[Tensor, Tensor, Tensor]:
    """Bidirectional InfoNCE between online features and momentum keys.

    The i-th online visual row is scored against every momentum tactile row;
    in the default variant the denominator ranges over j != i only, so a batch
    of identical features scores log(B-1) per direction. Gradients flow to
    the online features only; keys are expected detached.
    """
    b = f_v.shape[0]
    if b < 2:
        raise ValueError("contrastive batch must hold at least 2 rows")
    if variant not in ("standard-infonce", "verbatim-moco"):
        raise ValueError(f"unknown InfoNCE variant {variant!r}")
    eye = np.eye(b, dtype=f_v.dtype)

    def one_direction(query: Tensor, keys: Tensor) -> Tensor:
        logits = T.mul(T.matmul(query, T.transpose(keys, (1, 0))), _c(1.0 / temperature, query.dtype))
        pos = T.tsum(T.mul(logits, Tensor(eye)), axis=1)
        if variant == "verbatim-moco":
            masked = T.add(logits, Tensor(eye * np.asarray(-1e30, dtype=eye.dtype)))
            denom = T.logsumexp(masked, axis=1)
        else:
            denom = T.logsumexp(logits, axis=1)
        return T.tmean(T.sub(denom, pos))

    l_vt = one_direction(f_v, m_c)
    l_tv = one_direction(f_c, m_v)
    return l_vt, l_tv, T.add(l_vt, l_tv)


class GaussianActor(Module):
    """Tanh-squashed Gaussian policy over a flat observation vector."""

    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator, hidden: int = 256):
        self.trunk = MLP([obs_dim, hidden, hidden], rng)
        self.mu_head = Dense(hidden, act_dim, rng)
        self.log_std_head = Dense(hidden, act_dim, rng)
        self.act_dim = act_dim

    def forward(self, obs: Tensor) -> tuple[Tensor, Tensor]:
        h = T.relu(self.trunk(obs))
        return self.mu_head(h), T.clip(self.log_std_head(h), LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, obs: Tensor, rng: np.random.Generator) -> tuple[Tensor, Tensor]:
        """Reparameterized action in (-1, 1) and its log-density, shape (B, 1)."""
        mu, log_std = self(obs)
        dt = mu.dtype
        eps = Tensor(rng.standard_normal(mu.shape).astype(dt))
        std = T.exp(log_std)
        u = mu + std * eps
        action = T.tanh(u)
        logp_u = (eps * eps * _c(-0.5, dt) - log_std - _c(0.5 * _LOG_2PI, dt)).sum(axis=1, keepdims=True)
        # log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
        squash = ((_c(_LOG_2, dt) - u - T.softplus(u * _c(-2.0, dt))) * _c(2.0, dt)).sum(axis=1, keepdims=True)
        return action, logp_u - squash


class QNet(Module):
    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator, hidden: int = 256):
        self.net = MLP([obs_dim + act_dim, hidden, hidden, 1], rng)

    def forward(self, obs: Tensor, act: Tensor) -> Tensor:
        return self.net(T.concat([obs, act], axis=1))


class Agent:
    """SAC learner over fused visual-tactile features with a contrastive step."""

    def __init__(self, cfg: AgentConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.seed = seed
        c_in = 3 * cfg.frame_stack
        kw = dict(c_in=c_in, image_size=cfg.image_size, width=cfg.token_width, feature_dim=cfg.feature_dim)

        self.enc_v = ConvEncoder(rng, **kw)
        self.has_touch = cfg.touch != "none"
        if self.has_touch:
            self.enc_c = ConvEncoder(rng, **kw)
            self.fusion = make_fusion(cfg.fusion, cfg.token_width, cfg.heads, rng)
            tokens = self.enc_v.side ** 2
            fused_dim = fusion_output_dim(cfg.fusion, tokens, cfg.token_width)
        else:
            self.enc_c = None
            self.fusion = None
            fused_dim = (self.enc_v.side ** 2) * cfg.token_width

        self.pmlp = MLP([4, *cfg.proprio_dims], rng)
        obs_dim = fused_dim + cfg.proprio_dims[-1]
        self.obs_dim = obs_dim
        self.actor = GaussianActor(obs_dim, 2, rng, cfg.hidden)
        self.q1 = QNet(obs_dim, 2, rng, cfg.hidden)
        self.q2 = QNet(obs_dim, 2, rng, cfg.hidden)
        self.t1 = QNet(obs_dim, 2, rng, cfg.hidden)
        self.t2 = QNet(obs_dim, 2, rng, cfg.hidden)
        ParamStore.from_modules(self.t1).copy_values_from(ParamStore.from_modules(self.q1))
        ParamStore.from_modules(self.t2).copy_values_from(ParamStore.from_modules(self.q2))
        self.log_alpha = Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)

        self.contrastive_on = self.has_touch and cfg.contrastive != "none" and cfg.contrastive_weight != 0.0
        if self.contrastive_on:
            mom_rng = np.random.default_rng(seed)  # same draw sequence, then overwritten
            self.mom_v = ConvEncoder(mom_rng, **kw)
            self.mom_c = ConvEncoder(mom_rng, **kw)
            self.mom_v_store = ParamStore.from_modules(self.mom_v)
            self.mom_c_store = ParamStore.from_modules(self.mom_c)
            self.enc_v_store = ParamStore.from_modules(self.enc_v)
            self.enc_c_store = ParamStore.from_modules(self.enc_c)
            self.mom_v_store.copy_values_from(self.enc_v_store)
            self.mom_c_store.copy_values_from(self.enc_c_store)
        else:
            self.mom_v = self.mom_c = None

        critic_tensors: dict[str, Tensor] = {}
        critic_tensors.update(ParamStore.from_modules({"q1": self.q1, "q2": self.q2, "pmlp": self.pmlp}).tensors)
        critic_tensors.update(self.enc_v.trunk_params("enc_v."))
        if self.has_touch:
            critic_tensors.update(self.enc_c.trunk_params("enc_c."))
            critic_tensors.update(ParamStore.from_modules({"fusion": self.fusion}).tensors)
        self.critic_store = ParamStore(critic_tensors)
        self.actor_store = ParamStore.from_modules({"actor": self.actor})
        self.alpha_store = ParamStore({"log_alpha": self.log_alpha})
        if self.contrastive_on:
            enc_tensors: dict[str, Tensor] = {}
            enc_tensors.update(self.enc_v.named_params("enc_v."))
            enc_tensors.update(self.enc_c.named_params("enc_c."))
            self.encoder_store = ParamStore(enc_tensors)
        else:
            self.encoder_store = None
        self.critic_head_store = ParamStore.from_modules({"q1": self.q1, "q2": self.q2})
        self.target_store = ParamStore.from_modules({"q1": self.t1, "q2": self.t2})

        self.adam = AdamConfig(lr=cfg.lr)
        self.act_rng = np.random.default_rng(seed + 1)
        self.update_rng = np.random.default_rng(seed + 2)
        self.updates = 0

    # -- feature pipeline ----------------------------------------------------

    def encode(self, visual_stacks: np.ndarray, tactile_stacks: np.ndarray | None):
        """Online feature maps and unit-normalized contrastive vectors."""
        x_v = Tensor(stack_to_input(visual_stacks))
        fmap_v = self.enc_v(x_v)
        f_v = self.enc_v.project(fmap_v)
        if not self.has_touch:
            return {"fmap_v": fmap_v, "f_v": f_v, "x_v": x_v}
        x_c = Tensor(tactile_to_input(tactile_stacks))
        if x_c.shape != x_v.shape:
            raise ValueError(f"stack shape mismatch: visual {x_v.shape} vs tactile {x_c.shape}")
        fmap_c = self.enc_c(x_c)
        return {
            "fmap_v": fmap_v, "f_v": f_v, "x_v": x_v,
            "fmap_c": fmap_c, "f_c": self.enc_c.project(fmap_c), "x_c": x_c,
        }

    def observe(self, visual_stacks, tactile_stacks, proprio) -> Tensor:
        """Fused observation vector: [fused features, MLP(proprioception)]."""
        x_v = Tensor(stack_to_input(visual_stacks))
        fmap_v = self.enc_v(x_v)
        tok_v = self.enc_v.tokens(fmap_v)
        if self.has_touch:
            x_c = Tensor(tactile_to_input(tactile_stacks))
            tok_c = self.enc_c.tokens(self.enc_c(x_c))
            fused = self.fusion(tok_v, tok_c)
        else:
            b, t, w = tok_v.shape
            fused = T.reshape(tok_v, (b, t * w))
        p = self.pmlp(Tensor(np.asarray(proprio, dtype=np.float32)))
        return T.concat([fused, p], axis=1)

    def select_action(self, visual_stack, tactile_stack, proprio, deterministic: bool = True) -> np.ndarray:
        """Action in [-1, 1]^2; the caller scales to environment units."""
        with no_grad():
            obs = self.observe(
                np.asarray(visual_stack)[None],
                None if not self.has_touch else np.asarray(tactile_stack)[None],
                np.asarray(proprio, dtype=np.float32)[None],
            )
            if deterministic:
                mu, _ = self.actor(obs)
                return np.tanh(mu.data[0])
            action, _ = self.actor.sample(obs, self.act_rng)
            return action.data[0].copy()

    # -- learning ------------------------------------------------------------

    def _zero_all(self):
        self.critic_store.zero_grad()
        self.actor_store.zero_grad()
        self.alpha_store.zero_grad()
        self.target_store.zero_grad()
        if self.encoder_store is not None:
            self.encoder_store.zero_grad()

    def sac_update(self, buffer: ReplayBuffer) -> dict:
        cfg = self.cfg
        if len(buffer) < cfg.batch_size:
            raise RuntimeError(f"buffer holds {len(buffer)} transitions, need {cfg.batch_size}")
        batch = buffer.sample(cfg.batch_size)
        tac = batch["tactile"] if self.has_touch else None
        next_tac = batch["next_tactile"] if self.has_touch else None
        alpha = float(np.exp(self.log_alpha.data[0]))

        # (a) critic: entropy-regularized TD target from target heads
        with no_grad():
            next_obs = self.observe(batch["next_visual"], next_tac, batch["next_proprio"])
            next_action, next_logp = self.actor.sample(next_obs, self.update_rng)
            tq = np.minimum(
                self.t1(next_obs, next_action).data, self.t2(next_obs, next_action).data
            )[:, 0]
            td_target = batch["reward"] + cfg.gamma * batch["bootstrap"] * (
                tq - alpha * next_logp.data[:, 0]
            )
        self._zero_all()
        obs = self.observe(batch["visual"], tac, batch["proprio"])
        act = Tensor(batch["action"])
        target = Tensor(td_target[:, None].astype(np.float32))
        q1 = self.q1(obs, act)
        q2 = self.q2(obs, act)
        critic_loss = T.add(T.mse(q1, target), T.mse(q2, target))
        T.backward(critic_loss, self.critic_store)
        adam_step(self.critic_store, self.adam)

        # (b) actor on detached features
        self._zero_all()
        obs_const = Tensor(obs.data)
        action, logp = self.actor.sample(obs_const, self.update_rng)
        q_pi = T.minimum(self.q1(obs_const, action), self.q2(obs_const, action))
        actor_loss = T.tmean(T.sub(logp * _c(alpha, logp.dtype), q_pi))
        T.backward(actor_loss, self.actor_store)
        adam_step(self.actor_store, self.adam)

        # (c) temperature toward target entropy
        self._zero_all()
        entropy_gap = float(np.mean(logp.data) + cfg.target_entropy)
        alpha_loss = self.log_alpha * _c(-entropy_gap, self.log_alpha.dtype)
        T.backward(alpha_loss, self.alpha_store)
        adam_step(self.alpha_store, self.adam)

        # (d) Polyak on critic heads
        polyak_update(self.critic_head_store, self.target_store, cfg.polyak)

        # (e) contrastive recompute and encoder step, (f) momentum update
        con_val = 0.0
        if self.contrastive_on:
            self._zero_all()
            feats = self.encode(batch["visual"], tac)
            with no_grad():
                m_v = self.mom_v.project(self.mom_v(feats["x_v"].detach()))
                m_c = self.mom_c.project(self.mom_c(feats["x_c"].detach()))
            _, _, l_con = infonce_bidirectional(
                feats["f_v"], feats["f_c"], Tensor(m_v.data), Tensor(m_c.data),
                temperature=cfg.temperature, variant=cfg.contrastive,
            )
            con_loss = l_con * _c(cfg.contrastive_weight, l_con.dtype)
            T.backward(con_loss, self.encoder_store)
            adam_step(self.encoder_store, self.adam)
            con_val = float(l_con.data)
            momentum_update(self.enc_v_store, self.mom_v_store, cfg.eta)
            momentum_update(self.enc_c_store, self.mom_c_store, cfg.eta)

        self.updates += 1
        return {
            "critic_loss": float(critic_loss.data),
            "actor_loss": float(actor_loss.data),
            "alpha_loss": float(alpha_loss.data[0]),
            "alpha": alpha,
            "contrastive": con_val,
            "q1_mean": float(np.mean(q1.data)),
            "td_target": td_target,
        }

    # -- persistence -----------------------------------------------------------

    def _module_stores(self) -> dict[str, ParamStore]:
        mods = {"enc_v": ParamStore.from_modules(self.enc_v),
                "pmlp": ParamStore.from_modules(self.pmlp),
                "actor": ParamStore.from_modules(self.actor),
                "q1": ParamStore.from_modules(self.q1),
                "q2": ParamStore.from_modules(self.q2),
                "t1": ParamStore.from_modules(self.t1),
                "t2": ParamStore.from_modules(self.t2),
                "alpha": ParamStore({"log_alpha": self.log_alpha})}
        if self.has_touch:
            mods["enc_c"] = ParamStore.from_modules(self.enc_c)
            fusion_params = ParamStore.from_modules(self.fusion).tensors
            if fusion_params:
                mods["fusion"] = ParamStore(fusion_params)
        if self.contrastive_on:
            mods["mom_v"] = self.mom_v_store
            mods["mom_c"] = self.mom_c_store
        return mods

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, store in self._module_stores().items():
            for k, arr in store.state_arrays(f"{name}/").items():
                if "/adam_" not in k:  # module stores carry no optimizer state
                    out[k] = arr
        for name, store in (
            ("opt_critic", self.critic_store), ("opt_actor", self.actor_store),
            ("opt_alpha", self.alpha_store), ("opt_encoder", self.encoder_store),
        ):
            if store is None:
                continue
            for k, arr in store.state_arrays(f"{name}/").items():
                if "/adam_" in k or k.endswith("adam_t"):
                    out[k] = arr
        out["meta/updates"] = np.asarray([self.updates], dtype=np.int64)
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]):
        for name, store in self._module_stores().items():
            store.load_state_arrays(arrays, f"{name}/")
        for name, store in (
            ("opt_critic", self.critic_store), ("opt_actor", self.actor_store),
            ("opt_alpha", self.alpha_store), ("opt_encoder", self.encoder_store),
        ):
            if store is None:
                continue
            store.adam_m = {k: arrays[f"{name}/adam_m/{k}"].copy() for k in store.tensors
                            if f"{name}/adam_m/{k}" in arrays}
            store.adam_v = {k: arrays[f"{name}/adam_v/{k}"].copy() for k in store.tensors
                            if f"{name}/adam_v/{k}" in arrays}
            store.adam_t = int(arrays[f"{name}/adam_t"][0])
        self.updates = int(arrays["meta/updates"][0])


def save_agent(agent: Agent, path: str | os.PathLike):
    from . import checkpoint

    arrays = dict(agent.state_arrays())
    cfg_blob = json.dumps(asdict(agent.cfg), sort_keys=True).encode("utf-8")
    arrays["meta/config"] = np.frombuffer(cfg_blob, dtype=np.uint8).copy()
    arrays["meta/seed"] = np.asarray([agent.seed], dtype=np.int64)
    checkpoint.save(path, arrays)


def load_agent(path: str | os.PathLike) -> Agent:
    from . import checkpoint

    arrays = checkpoint.load(path)
    raw = json.loads(bytes(arrays["meta/config"]).decode("utf-8"))
    raw["proprio_dims"] = tuple(raw["proprio_dims"])
    cfg = AgentConfig(**raw)
    agent = Agent(cfg, seed=int(arrays["meta/seed"][0]))
    agent.load_state_arrays(arrays)
    return agent


def params_sha256(store: ParamStore) -> str:
    h = hashlib.sha256()
    for name in sorted(store.tensors):
        h.update(name.encode())
        h.update(np.ascontiguousarray(store.tensors[name].data).tobytes())
    return h.hexdigest()


@dataclass
class TrainResult:
    agent: Agent
    curves: list[dict] = field(default_factory=list)
    gen_hash_before: str | None = None
    gen_hash_after: str | None = None


def run_vtcon_training(
    world_cfg: WorldConfig,
    agent_cfg: AgentConfig,
    steps: int,
    seed: int,
    gen: TouchGenerator | None = None,
    log=None,
    log_every: int = 50,
) -> TrainResult:
    """Seeded rollout-and-update loop; returns the agent plus per-episode curves."""
    if agent_cfg.touch == "generated" and gen is None:
        raise ValueError("generated-touch training requires a touch generator checkpoint")
    env = PushWorld(world_cfg, seed=seed)
    agent = Agent(agent_cfg, seed=seed + 1)
    buffer = ReplayBuffer(
        capacity=agent_cfg.buffer_capacity,
        image_size=world_cfg.image_size,
        stack=world_cfg.frame_stack,
        tactile_mode="repeat" if agent_cfg.touch == "generated" else "rolling",
        seed=seed + 2,
    )
    warmup_rng = np.random.default_rng(seed + 3)
    gen_store = None
    gen_hash_before = gen_hash_after = None
    if gen is not None:
        gen_store = ParamStore.from_modules(gen)
        gen_hash_before = params_sha256(gen_store)

    def tactile_obs(obs: Observation) -> np.ndarray:
        if agent_cfg.touch == "generated":
            frame = generate(gen, obs.visual)
            return np.repeat(frame[None], world_cfg.frame_stack, axis=0)
        return obs.tactile

    obs = env.reset()
    tac = tactile_obs(obs)
    buffer.begin_episode(obs.visual[-1], tac[-1], obs.proprio)
    episode_return = 0.0
    episode_len = 0
    episodes = 0
    losses: list[dict] = []
    curves: list[dict] = []

    for step in range(1, steps + 1):
        if step <= agent_cfg.warmup_steps:
            action = warmup_rng.uniform(-1.0, 1.0, size=2)
        else:
            action = agent.select_action(obs.visual, tac, obs.proprio, deterministic=False)
        obs2, reward, terminated, truncated, info = env.step(action * world_cfg.max_tcp_step)
        tac2 = tactile_obs(obs2)
        buffer.add_step(action, reward, obs2.visual[-1], tac2[-1], obs2.proprio, terminated, truncated)
        episode_return += reward
        episode_len += 1

        if step > agent_cfg.warmup_steps and step % agent_cfg.update_every == 0:
            losses.append(agent.sac_update(buffer))

        if terminated or truncated:
            episodes += 1

            def _avg(key):
                return float(np.mean([r[key] for r in losses])) if losses else float("nan")

            row = {
                "step": step,
                "episode": episodes,
                "reward": episode_return,
                "episode_len": episode_len,
                "success": bool(info.get("success", False)),
                "critic_loss": _avg("critic_loss"),
                "actor_loss": _avg("actor_loss"),
                "contrastive": _avg("contrastive"),
                "alpha": _avg("alpha"),
            }
            curves.append(row)
            if log and episodes % log_every == 0:
                log(f"step {step:7d}  ep {episodes:5d}  reward {episode_return:8.3f}  "
                    f"len {episode_len:3d}  alpha {row['alpha']:.4f}")
            losses = []
            obs = env.reset()
            tac = tactile_obs(obs)
            buffer.begin_episode(obs.visual[-1], tac[-1], obs.proprio)
            episode_return = 0.0
            episode_len = 0
        else:
            obs = obs2
            tac = tac2

    if gen_store is not None:
        gen_hash_after = params_sha256(gen_store)
        if gen_hash_after != gen_hash_before:
            raise RuntimeError("touch generator parameters changed during training")
    return TrainResult(agent=agent, curves=curves, gen_hash_before=gen_hash_before, gen_hash_after=gen_hash_after)
