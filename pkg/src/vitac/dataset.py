"""Paired visual-tactile dataset collection and storage.

An expert policy is rolled out in the pushing environment and every step's
camera frame, contact-depth frame, proprioception, and action are recorded.
A dataset is a directory: ``manifest.json`` plus one tensor container per
sequence. Frames are quantized to uint8; a sequence of T actions stores T+1
frames so that 3-frame stacks can be rebuilt for any step with edge clamping.

Splits are assigned 7:2:1 by sequence count (validation and test round down,
the remainder goes to train) and are disjoint by construction.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import checkpoint
from .expert import scripted_expert
from .images import write_pgm, write_ppm
from .world import PushWorld, WorldConfig, WorldState

DATASET_VERSION = 1
PROBE_EPISODES = 20
PROBE_MIN_SUCCESS = 0.5

ExpertFn = Callable[[WorldState, WorldConfig], np.ndarray]


def split_counts(n_sequences: int) -> tuple[int, int, int]:
    """(train, val, test) counts: val/test floor at 20%/10%, rest to train."""
    n_val = (n_sequences * 2) // 10
    n_test = n_sequences // 10
    return n_sequences - n_val - n_test, n_val, n_test


def _quantize(frame: np.ndarray) -> np.ndarray:
    return (np.clip(frame, 0.0, 1.0) * 255.0).round().astype(np.uint8)


@dataclass
class SequenceRecord:
    """One recorded episode. Arrays cover T+1 states and T actions."""

    visual: np.ndarray  # (T+1, H, W, 3) uint8
    tactile: np.ndarray  # (T+1, H, W) uint8
    proprio: np.ndarray  # (T+1, 4) float32
    action: np.ndarray  # (T, 2) float32
    meta: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return self.visual.shape[0]

    def stack_indices(self, t: int, n: int = 3) -> np.ndarray:
        """Frame indices of the n-frame stack ending at frame t (edge-clamped)."""
        return np.clip(np.arange(t - n + 1, t + 1), 0, self.n_frames - 1)


@dataclass
class PairedDataset:
    root: Path
    manifest: dict
    sequences: list[SequenceRecord]

    def split(self, name: str) -> list[SequenceRecord]:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return [s for s in self.sequences if s.meta["split"] == name]

    @property
    def image_size(self) -> int:
        return int(self.manifest["image_size"])


def record_episode(env: PushWorld, expert: ExpertFn) -> SequenceRecord:
    obs = env.reset()
    visual = [obs.visual[-1]]
    tactile = [obs.tactile[-1]]
    proprio = [obs.proprio]
    actions = []
    info: dict = {}
    while True:
        action = expert(env.state, env.cfg)
        obs, _, terminated, truncated, info = env.step(action)
        actions.append(np.asarray(action, dtype=np.float32))
        visual.append(obs.visual[-1])
        tactile.append(obs.tactile[-1])
        proprio.append(obs.proprio)
        if terminated or truncated:
            break
    return SequenceRecord(
        visual=_quantize(np.stack(visual)),
        tactile=_quantize(np.stack(tactile)),
        proprio=np.stack(proprio).astype(np.float32),
        action=np.stack(actions),
        meta={
            "length": len(actions),
            "success": bool(info.get("success", False)),
            "object": env.cfg.object.kind,
            "mass": float(env.state.shape.mass),
            "friction": float(env.state.shape.ground_friction),
        },
    )


def probe_expert(cfg: WorldConfig, expert: ExpertFn, seed: int, episodes: int = PROBE_EPISODES) -> float:
    """Success rate of the expert over a short seeded probe run."""
    env = PushWorld(cfg, seed=seed)
    wins = 0
    for _ in range(episodes):
        obs = env.reset()
        while True:
            _, _, terminated, truncated, info = env.step(expert(env.state, env.cfg))
            if terminated or truncated:
                wins += int(terminated and info["success"])
                break
    return wins / episodes


def collect_pairs(
    cfg: WorldConfig,
    n_sequences: int,
    seed: int,
    out_dir: str | os.PathLike,
    expert: ExpertFn = scripted_expert,
    probe_episodes: int = PROBE_EPISODES,
) -> PairedDataset:
    """Roll out the expert and write a paired dataset directory.

    Aborts before writing anything if the expert clears fewer than half of a
    seeded probe run; low-quality rollouts would poison the paired data.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be positive")
    if probe_episodes > 0:
        rate = probe_expert(cfg, expert, seed=seed + 1_000_003, episodes=probe_episodes)
        if rate < PROBE_MIN_SUCCESS:
            raise RuntimeError(
                f"expert success rate {rate:.0%} over {probe_episodes} probe episodes "
                f"is below the {PROBE_MIN_SUCCESS:.0%} collection gate"
            )

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    n_train, n_val, _ = split_counts(n_sequences)

    env = PushWorld(cfg, seed=seed)
    entries = []
    sequences = []
    for i in range(n_sequences):
        rec = record_episode(env, expert)
        if i < n_train:
            split = "train"
        elif i < n_train + n_val:
            split = "val"
        else:
            split = "test"
        rec.meta.update({"id": i, "split": split, "env_seed": [seed, i]})
        fname = f"seq_{i:05d}.vtac"
        checkpoint.save(
            root / fname,
            {
                "visual": rec.visual,
                "tactile": rec.tactile,
                "proprio": rec.proprio,
                "action": rec.action,
            },
        )
        entries.append({"file": fname, **rec.meta})
        sequences.append(rec)

    manifest = {
        "version": DATASET_VERSION,
        "seed": seed,
        "n_sequences": n_sequences,
        "image_size": cfg.image_size,
        "frame_stack": cfg.frame_stack,
        "object": cfg.object.kind,
        "sequences": entries,
    }
    blob = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8")
    checkpoint.atomic_write_bytes(root / "manifest.json", blob)
    return PairedDataset(root=root, manifest=manifest, sequences=sequences)


def load_dataset(root: str | os.PathLike) -> PairedDataset:
    root = Path(root)
    with open(root / "manifest.json", "rb") as f:
        manifest = json.loads(f.read().decode("utf-8"))
    if manifest.get("version") != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {manifest.get('version')!r}")
    sequences = []
    for entry in manifest["sequences"]:
        arrays = checkpoint.load(root / entry["file"])
        meta = {k: v for k, v in entry.items() if k != "file"}
        sequences.append(
            SequenceRecord(
                visual=arrays["visual"],
                tactile=arrays["tactile"],
                proprio=arrays["proprio"],
                action=arrays["action"],
                meta=meta,
            )
        )
    return PairedDataset(root=root, manifest=manifest, sequences=sequences)


def render_preview(
    dataset: PairedDataset, out_dir: str | os.PathLike, max_sequences: int = 4, stride: int = 40
):
    """Dump paired camera/touch frames as PPM/PGM files for eyeballing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in dataset.sequences[:max_sequences]:
        sid = rec.meta["id"]
        for t in range(0, rec.n_frames, stride):
            write_ppm(out / f"seq{sid:03d}_t{t:04d}_visual.ppm", rec.visual[t])
            write_pgm(out / f"seq{sid:03d}_t{t:04d}_touch.pgm", rec.tactile[t])
            written.append(t)
    return written
