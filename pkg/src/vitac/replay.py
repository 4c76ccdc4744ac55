"""Replay buffer for off-policy training from stacked image observations.

Frames are stored once per environment step as uint8 in a ring; transitions
hold absolute frame ids for their observation and next-observation stacks, so
a 3-frame stack costs three int64 indices instead of three image copies.
Stack indices clamp at the episode's first frame, matching the environment's
rolling-stack behavior after reset.

Transitions are FIFO with a fixed capacity. The frame ring is oversized by a
slack margin so frames referenced by live transitions are never overwritten;
a guard raises if an overwrite would ever reach a referenced frame.

Tactile stacks have two modes: "rolling" mirrors the visual stack indices
(ground-truth touch), "repeat" points all stack slots at the current frame
(generated touch is produced once per step and tiled).
"""

from __future__ import annotations

import numpy as np

DEFAULT_CAPACITY = 20_000
FRAME_SLACK = 2_512


def _quantize(frame: np.ndarray) -> np.ndarray:
    if frame.dtype == np.uint8:
        return frame
    return (np.clip(frame, 0.0, 1.0) * 255.0).round().astype(np.uint8)


class ReplayBuffer:
    def __init__(
        self,
        capacity: int = DEFAULT_CAPACITY,
        image_size: int = 64,
        stack: int = 3,
        tactile_mode: str = "rolling",
        frame_slack: int = FRAME_SLACK,
        seed: int = 0,
    ):
        if tactile_mode not in ("rolling", "repeat"):
            raise ValueError(f"unknown tactile_mode {tactile_mode!r}")
        self.capacity = capacity
        self.stack = stack
        self.tactile_mode = tactile_mode
        self.frame_cap = capacity + frame_slack
        h = image_size
        self._visual = np.zeros((self.frame_cap, h, h, 3), dtype=np.uint8)
        self._tactile = np.zeros((self.frame_cap, h, h), dtype=np.uint8)

        c = capacity
        self._vis_idx = np.zeros((c, stack), dtype=np.int64)
        self._tac_idx = np.zeros((c, stack), dtype=np.int64)
        self._next_vis_idx = np.zeros((c, stack), dtype=np.int64)
        self._next_tac_idx = np.zeros((c, stack), dtype=np.int64)
        self._proprio = np.zeros((c, 4), dtype=np.float32)
        self._next_proprio = np.zeros((c, 4), dtype=np.float32)
        self._action = np.zeros((c, 2), dtype=np.float32)
        self._reward = np.zeros(c, dtype=np.float32)
        self._bootstrap = np.zeros(c, dtype=np.float32)  # 0 when terminated, 1 otherwise
        self._insertion = np.full(c, -1, dtype=np.int64)

        self.count = 0  # total transitions ever inserted
        self._frame_count = 0  # total frames ever written
        self._episode_start = None  # first frame id of the open episode
        self._last_frame = None
        self._last_proprio = None
        self._rng = np.random.default_rng(seed)

    def __len__(self):
        return min(self.count, self.capacity)

    @property
    def oldest_insertion(self) -> int:
        return max(0, self.count - self.capacity)

    def _write_frame(self, visual, tactile) -> int:
        fid = self._frame_count
        if fid >= self.frame_cap and self.count > 0:
            # slot being reused held frame (fid - frame_cap); it must be dead
            oldest_slot = self.oldest_insertion % self.capacity
            oldest_ref = int(self._vis_idx[oldest_slot].min())
            if fid - self.frame_cap >= oldest_ref:
                raise RuntimeError(
                    "frame ring too small for episode lengths in use; increase frame_slack"
                )
        slot = fid % self.frame_cap
        self._visual[slot] = _quantize(visual)
        self._tactile[slot] = _quantize(tactile)
        self._frame_count += 1
        return fid

    def _stack_ids(self, fid: int) -> np.ndarray:
        lo = self._episode_start
        return np.clip(np.arange(fid - self.stack + 1, fid + 1), lo, fid)

    def _tactile_ids(self, fid: int) -> np.ndarray:
        if self.tactile_mode == "repeat":
            return np.full(self.stack, fid, dtype=np.int64)
        return self._stack_ids(fid)

    def begin_episode(self, visual_frame, tactile_frame, proprio):
        """Record the reset frame; must precede the episode's add_step calls."""
        fid = self._write_frame(visual_frame, tactile_frame)
        self._episode_start = fid
        self._last_frame = fid
        self._last_proprio = np.asarray(proprio, dtype=np.float32)

    def add_step(self, action, reward, visual_frame, tactile_frame, proprio, terminated, truncated):
        if self._episode_start is None:
            raise RuntimeError("begin_episode must be called before add_step")
        prev = self._last_frame
        fid = self._write_frame(visual_frame, tactile_frame)

        slot = self.count % self.capacity
        self._vis_idx[slot] = self._stack_ids(prev)
        self._tac_idx[slot] = self._tactile_ids(prev)
        self._next_vis_idx[slot] = self._stack_ids(fid)
        self._next_tac_idx[slot] = self._tactile_ids(fid)
        self._proprio[slot] = self._last_proprio
        self._next_proprio[slot] = np.asarray(proprio, dtype=np.float32)
        self._action[slot] = np.asarray(action, dtype=np.float32)
        self._reward[slot] = reward
        self._bootstrap[slot] = 0.0 if terminated else 1.0
        self._insertion[slot] = self.count
        self.count += 1

        self._last_frame = fid
        self._last_proprio = self._next_proprio[slot].copy()
        if terminated or truncated:
            self._episode_start = None

    def _gather_visual(self, ids: np.ndarray) -> np.ndarray:
        return self._visual[ids % self.frame_cap].astype(np.float32) / 255.0

    def _gather_tactile(self, ids: np.ndarray) -> np.ndarray:
        return self._tactile[ids % self.frame_cap].astype(np.float32) / 255.0

    def sample(self, batch_size: int) -> dict:
        """Uniform minibatch as float32 arrays; stacks are (B, stack, H, W[, 3])."""
        n = len(self)
        if n == 0:
            raise RuntimeError("cannot sample from an empty buffer")
        slots = self._rng.integers(0, n, size=batch_size)
        return {
            "visual": self._gather_visual(self._vis_idx[slots]),
            "tactile": self._gather_tactile(self._tac_idx[slots]),
            "proprio": self._proprio[slots].copy(),
            "action": self._action[slots].copy(),
            "reward": self._reward[slots].copy(),
            "bootstrap": self._bootstrap[slots].copy(),
            "next_visual": self._gather_visual(self._next_vis_idx[slots]),
            "next_tactile": self._gather_tactile(self._next_tac_idx[slots]),
            "next_proprio": self._next_proprio[slots].copy(),
            "insertion": self._insertion[slots].copy(),
        }
