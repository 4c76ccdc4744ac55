"""Vision-to-touch generation.

A coarse-to-refine encoder-decoder predicts the current contact-depth image
from a channel-concatenated stack of camera frames. Coarse features attend to
a learnable positional embedding (visual tokens as queries, embedding as
keys/values), a refine stage and residual blocks deepen the representation,
and a hierarchical decoder of transposed convolutions and nearest-neighbor
upsampling restores tactile resolution. The output head is a clamped linear
unit so exact zero is reachable for no-contact frames.

Training minimizes a perceptual loss: MSE between tap activations of a frozen
seeded random conv stack, plus pixel MSE.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

from . import tensor as T
from .dataset import PairedDataset, SequenceRecord
from .metrics import psnr, ssim
from .nn import (
    Conv2d,
    ConvTranspose2d,
    LayerNorm,
    Module,
    MultiheadAttention,
    ParamStore,
    ResidualBlock,
)
from .optim import AdamConfig, adam_step
from .tensor import Tensor, no_grad

ATTENTION_HEADS = 8
RESIDUAL_BLOCKS = 4
LAMBDA_PIX = 1.0


def stack_to_input(frames: np.ndarray) -> np.ndarray:
    """Channel-concatenate a frame stack: (N,H,W,3) or (B,N,H,W,3) -> (B,3N,H,W)."""
    arr = np.asarray(frames)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5 or arr.shape[-1] != 3:
        raise ValueError(f"expected (N,H,W,3) or (B,N,H,W,3), got {np.asarray(frames).shape}")
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / 255.0
    arr = arr.astype(np.float32, copy=False)
    b, n, h, w, c = arr.shape
    return np.ascontiguousarray(arr.transpose(0, 1, 4, 2, 3)).reshape(b, n * c, h, w)


class TouchGenerator(Module):
    """Predicts a 1-channel contact-depth image from a 3-frame visual stack."""

    def __init__(self, seed: int = 0, image_size: int = 64, frame_stack: int = 3):
        if image_size % 8 != 0:
            raise ValueError("image_size must be divisible by 8")
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.image_size = image_size
        self.frame_stack = frame_stack

        c_in = 3 * frame_stack
        self.c1 = Conv2d(c_in, 16, 3, rng, stride=2, pad=1)
        self.n1 = LayerNorm(16)
        self.c2 = Conv2d(16, 32, 3, rng, stride=2, pad=1)
        self.n2 = LayerNorm(32)
        self.c3 = Conv2d(32, 64, 3, rng, stride=2, pad=1)
        self.n3 = LayerNorm(64)

        side = image_size // 8
        self.pos = Tensor(
            rng.normal(0.0, 0.02, size=(1, side * side, 64)).astype(np.float32),
            requires_grad=True,
        )
        self.attn = MultiheadAttention(64, ATTENTION_HEADS, rng)

        self.r1 = Conv2d(64, 64, 3, rng, pad=1)
        self.rn1 = LayerNorm(64)
        self.r2 = Conv2d(64, 64, 3, rng, pad=1)
        self.rn2 = LayerNorm(64)
        self.blocks = [ResidualBlock(64, rng) for _ in range(RESIDUAL_BLOCKS)]

        self.d1 = ConvTranspose2d(64, 32, 4, rng, stride=2, pad=1)
        self.dn1 = LayerNorm(32)
        self.d2 = Conv2d(32, 16, 3, rng, pad=1)
        self.dn2 = LayerNorm(16)
        self.d3 = ConvTranspose2d(16, 8, 4, rng, stride=2, pad=1)
        self.dn3 = LayerNorm(8)
        self.head = Conv2d(8, 1, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        b = x.shape[0]
        if x.shape[1] != 3 * self.frame_stack or x.shape[2:] != (self.image_size, self.image_size):
            raise ValueError(f"expected (B,{3 * self.frame_stack},{self.image_size},{self.image_size}), got {x.shape}")
        z = T.relu(self.n1(self.c1(x)))
        z = T.relu(self.n2(self.c2(z)))
        z = T.relu(self.n3(self.c3(z)))
        side = self.image_size // 8

        tokens = T.transpose(T.reshape(z, (b, 64, side * side)), (0, 2, 1))
        pos = T.add(self.pos, Tensor(np.zeros((b, 1, 1), dtype=np.float32)))
        # residual around the cross-attention block: the attended output is a
        # mixture of embedding values, so without the skip the visual content
        # would reach the decoder only through the softmax logits
        attended = T.add(self.attn(tokens, pos), tokens)
        z = T.reshape(T.transpose(attended, (0, 2, 1)), (b, 64, side, side))

        z = T.relu(self.rn1(self.r1(z)))
        z = T.relu(self.rn2(self.r2(z)))
        for block in self.blocks:
            z = block(z)

        z = T.relu(self.dn1(self.d1(z)))  # 2x via transposed conv
        z = T.relu(self.dn2(self.d2(z)))
        z = T.upsample_nearest(z, 2)
        z = T.relu(self.dn3(self.d3(z)))  # 2x via transposed conv
        # linear depth regression head; clipping to [0,1] happens at inference
        # only (``generate``), a hard clip here would zero gradients for any
        # contact pixel the net currently predicts below zero
        return self.head(z)


def generate(gen: TouchGenerator, frames: np.ndarray) -> np.ndarray:
    """Run the generator on a frame stack; (N,H,W,3) -> (H,W), batched -> (B,H,W)."""
    single = np.asarray(frames).ndim == 4
    x = stack_to_input(frames)
    with no_grad():
        out = np.clip(gen(Tensor(x)).data, 0.0, 1.0)
    return out[0, 0] if single else out[:, 0]


def repeat_to_sequence(c_gen: np.ndarray, n: int = 3) -> np.ndarray:
    """Tile one generated touch frame into an n-frame stack."""
    c_gen = np.asarray(c_gen)
    return np.repeat(c_gen[None], n, axis=0)


class PerceptualExtractor(Module):
    """Frozen random conv stack; relu tap activations define the feature space."""

    def __init__(self, seed: int = 0, widths: Sequence[int] = (8, 16, 32)):
        rng = np.random.default_rng(seed)
        chans = [1, *widths]
        self.convs = [Conv2d(a, b, 3, rng, stride=2, pad=1) for a, b in zip(chans[:-1], chans[1:])]
        for t in list(self.named_params().values()):
            t.requires_grad = False
            t.data.setflags(write=False)

    def taps(self, x: Tensor) -> list[Tensor]:
        outs = []
        for conv in self.convs:
            x = T.relu(conv(x))
            outs.append(x)
        return outs


def perceptual_loss(
    c_gen: Tensor, c_gt: Tensor, extractor: PerceptualExtractor, lambda_pix: float = LAMBDA_PIX
) -> Tensor:
    """Sum of tap-activation MSEs plus lambda_pix times pixel MSE."""
    total = None
    for fa, fb in zip(extractor.taps(c_gen), extractor.taps(c_gt)):
        term = T.mse(fa, fb)
        total = term if total is None else T.add(total, term)
    if lambda_pix != 0.0:
        pix = T.mul(T.mse(c_gen, c_gt), Tensor(np.asarray(lambda_pix, dtype=np.float32)))
        total = T.add(total, pix)
    return total


def save_generator(gen: TouchGenerator, path: str | os.PathLike):
    from . import checkpoint

    store = ParamStore.from_modules(gen)
    arrays = store.state_arrays(prefix="gen/")
    arrays["meta/image_size"] = np.asarray([gen.image_size], dtype=np.int64)
    arrays["meta/frame_stack"] = np.asarray([gen.frame_stack], dtype=np.int64)
    checkpoint.save(path, arrays)


def load_generator(path: str | os.PathLike) -> TouchGenerator:
    from . import checkpoint

    arrays = checkpoint.load(path)
    gen = TouchGenerator(
        image_size=int(arrays["meta/image_size"][0]),
        frame_stack=int(arrays["meta/frame_stack"][0]),
    )
    ParamStore.from_modules(gen).load_state_arrays(arrays, prefix="gen/")
    return gen


def _gen_samples(records: Sequence[SequenceRecord], stride: int) -> list[tuple[SequenceRecord, int]]:
    out = []
    for rec in records:
        out.extend((rec, t) for t in range(0, rec.n_frames, stride))
    return out


def _make_batch(samples: Sequence[tuple[SequenceRecord, int]]):
    stacks = np.stack([rec.visual[rec.stack_indices(t)] for rec, t in samples])
    x = stack_to_input(stacks)
    y = np.stack([rec.tactile[t] for rec, t in samples]).astype(np.float32) / 255.0
    return x, y[:, None]


def eval_generator(gen: TouchGenerator, records, stride: int = 4, max_samples: int = 200) -> dict:
    """Mean PSNR/SSIM of generated vs ground-truth touch over sampled frames."""
    samples = _gen_samples(records, stride)[:max_samples]
    if not samples:
        return {"psnr": None, "ssim": None, "n": 0}
    psnrs, ssims = [], []
    for rec, t in samples:
        pred = generate(gen, rec.visual[rec.stack_indices(t)])
        gt = rec.tactile[t].astype(np.float32) / 255.0
        psnrs.append(psnr(pred, gt))
        ssims.append(ssim(pred, gt))
    return {"psnr": float(np.mean(psnrs)), "ssim": float(np.mean(ssims)), "n": len(samples)}


def train_generator(
    dataset: PairedDataset,
    epochs: int = 30,
    batch_size: int = 64,
    seed: int = 0,
    lr: float = 1e-3,
    frame_stride: int = 4,
    lambda_pix: float = LAMBDA_PIX,
    eval_stride: int = 8,
    out_path: str | os.PathLike | None = None,
    log=None,
):
    """Train on the train split; returns (generator, per-epoch history, test report)."""
    train = _gen_samples(dataset.split("train"), frame_stride)
    if not train:
        raise ValueError("dataset has no training sequences")
    gen = TouchGenerator(seed=seed, image_size=dataset.image_size)
    extractor = PerceptualExtractor(seed=seed + 1)
    store = ParamStore.from_modules(gen)
    cfg = AdamConfig(lr=lr)
    shuffle = np.random.default_rng(seed + 12345)

    history = []
    for epoch in range(epochs):
        order = shuffle.permutation(len(train))
        losses = []
        for lo in range(0, len(order), batch_size):
            batch = [train[i] for i in order[lo : lo + batch_size]]
            x, y = _make_batch(batch)
            loss = perceptual_loss(gen(Tensor(x)), Tensor(y), extractor, lambda_pix)
            T.backward(loss, store)
            adam_step(store, cfg)
            losses.append(float(loss.data))
        val = eval_generator(gen, dataset.split("val"), stride=eval_stride)
        row = {"epoch": epoch, "loss": float(np.mean(losses)), "val_psnr": val["psnr"], "val_ssim": val["ssim"]}
        history.append(row)
        if log:
            log(f"epoch {epoch:3d}  loss {row['loss']:.5f}  val_psnr {val['psnr']}  val_ssim {val['ssim']}")

    test = eval_generator(gen, dataset.split("test"), stride=eval_stride)
    if out_path is not None:
        save_generator(gen, out_path)
    return gen, history, test
