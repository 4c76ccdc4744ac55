"""Policy evaluation rollouts and ablation tables.

``evaluate`` rolls a trained agent (or a uniform-random policy) through seeded
episodes and reports per-episode reward, length, final distance error, and
success under a configurable distance threshold. ``run_ablation`` trains one
agent per (variant, seed) cell along a single config axis under an identical
step budget and env seed sequence, evaluates each, and renders the pooled
statistics as a text table.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .vtcon import Agent, AgentConfig, TrainResult, run_vtcon_training
from .vtgen import TouchGenerator, generate
from .world import PushWorld, WorldConfig

ABLATION_AXES = {
    "fusion": ("attention", "add", "concat"),
    "contrastive": ("verbatim-moco", "standard-infonce", "none"),
    "touch": ("gt", "generated", "none"),
}


@dataclass
class EvalReport:
    """Episode rows plus recomputable aggregates; aggregates are None when empty."""

    rows: list[dict] = field(default_factory=list)
    threshold: float = 0.025

    @property
    def n(self) -> int:
        return len(self.rows)

    def _col(self, key):
        return np.asarray([r[key] for r in self.rows], dtype=np.float64)

    @property
    def reward_mean(self):
        return float(self._col("reward").mean()) if self.rows else None

    @property
    def reward_std(self):
        return float(self._col("reward").std()) if self.rows else None

    @property
    def length_mean(self):
        return float(self._col("length").mean()) if self.rows else None

    @property
    def dist_err_mean(self):
        """Mean final distance to the last waypoint, in meters."""
        return float(self._col("final_dist").mean()) if self.rows else None

    @property
    def success_rate(self):
        return float(self._col("success").mean()) if self.rows else None

    def summary(self) -> dict:
        return {
            "n": self.n,
            "threshold": self.threshold,
            "reward_mean": self.reward_mean,
            "reward_std": self.reward_std,
            "length_mean": self.length_mean,
            "dist_err_mean": self.dist_err_mean,
            "success_rate": self.success_rate,
        }


def _episode_tactile(obs, touch: str, gen, frame_stack: int):
    if touch == "generated":
        frame = generate(gen, obs.visual)
        return np.repeat(frame[None], frame_stack, axis=0)
    return obs.tactile


def evaluate(
    agent: Agent | None,
    world_cfg: WorldConfig,
    episodes: int,
    seed: int,
    threshold: float | None = None,
    gen: TouchGenerator | None = None,
    deterministic: bool = True,
) -> EvalReport:
    """Roll ``episodes`` seeded episodes; ``agent=None`` runs a uniform-random policy.

    The env's own success threshold is overridden so termination and the
    report's success column agree on ``threshold``.
    """
    threshold = world_cfg.success_threshold if threshold is None else threshold
    touch = agent.cfg.touch if agent is not None else "none"
    if touch == "generated" and gen is None:
        raise ValueError("agent was trained on generated touch; pass its generator")
    env = PushWorld(replace(world_cfg, success_threshold=threshold), seed=seed)
    random_rng = np.random.default_rng(seed + 1)

    rows = []
    for ep in range(episodes):
        obs = env.reset()
        tac = _episode_tactile(obs, touch, gen, world_cfg.frame_stack)
        total = 0.0
        length = 0
        while True:
            if agent is None:
                action = random_rng.uniform(-1.0, 1.0, size=2)
            else:
                action = agent.select_action(obs.visual, tac, obs.proprio, deterministic=deterministic)
            obs, reward, terminated, truncated, info = env.step(action * world_cfg.max_tcp_step)
            tac = _episode_tactile(obs, touch, gen, world_cfg.frame_stack)
            total += reward
            length += 1
            if terminated or truncated:
                rows.append({
                    "episode": ep,
                    "reward": total,
                    "length": length,
                    "final_dist": info["final_goal_dist"],
                    "success": bool(info["success"]),
                })
                break
    return EvalReport(rows=rows, threshold=threshold)


@dataclass
class AblationCell:
    variant: str
    seed: int
    train: TrainResult
    report: EvalReport


@dataclass
class AblationResult:
    axis: str
    cells: list[AblationCell]
    threshold: float

    def variants(self) -> list[str]:
        seen = []
        for c in self.cells:
            if c.variant not in seen:
                seen.append(c.variant)
        return seen

    def pooled(self, variant: str) -> EvalReport:
        rows = []
        for c in self.cells:
            if c.variant == variant:
                rows.extend(c.report.rows)
        return EvalReport(rows=rows, threshold=self.threshold)

    def table(self) -> str:
        seeds = sorted({c.seed for c in self.cells})
        title = (
            f"{self.axis} ablation  |  success threshold {self.threshold * 100.0:.1f} cm"
            f"  |  seeds {tuple(seeds)}"
        )
        header = ("Variant", "Rewards", "Epi. Len.", "Dist. Err. (mm)", "Succ. Rate (%)")
        lines = [list(header)]
        for variant in self.variants():
            rep = self.pooled(variant)
            lines.append([
                variant,
                f"{rep.reward_mean:.2f} +/- {rep.reward_std:.2f}",
                f"{rep.length_mean:.1f}",
                f"{rep.dist_err_mean * 1000.0:.1f}",
                f"{rep.success_rate * 100.0:.1f}",
            ])
        widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
        out = [title]
        for j, row in enumerate(lines):
            out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if j == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out)


def run_ablation(
    axis: str,
    world_cfg: WorldConfig,
    agent_cfg: AgentConfig,
    steps: int,
    seeds,
    eval_episodes: int = 20,
    threshold: float = 0.04,
    gen: TouchGenerator | None = None,
    log=None,
) -> AblationResult:
    """Train and evaluate every variant along ``axis`` on identical budgets.

    Every variant sees the same training seeds (hence identical env seed
    sequences) and the same evaluation seeds.
    """
    if axis not in ABLATION_AXES:
        raise ValueError(f"unknown ablation axis {axis!r}; choose from {sorted(ABLATION_AXES)}")
    variants = ABLATION_AXES[axis]
    cells = []
    for variant in variants:
        cfg_v = replace(agent_cfg, **{axis: variant})
        if axis == "contrastive" and variant == "none":
            cfg_v = replace(cfg_v, contrastive_weight=0.0)
        for seed in seeds:
            train = run_vtcon_training(
                world_cfg, cfg_v, steps, seed,
                gen=gen if cfg_v.touch == "generated" else None)
            report = evaluate(
                train.agent, world_cfg, eval_episodes, seed=seed + 500_000,
                threshold=threshold, gen=gen if cfg_v.touch == "generated" else None)
            cells.append(AblationCell(variant=variant, seed=seed, train=train, report=report))
            if log:
                log(f"{axis}={variant} seed={seed}: success {report.success_rate:.2f} "
                    f"reward {report.reward_mean:.2f}")
    return AblationResult(axis=axis, cells=cells, threshold=threshold)


CURVE_FIELDS = ("step", "episode", "reward", "episode_len", "success",
                "critic_loss", "actor_loss", "contrastive", "alpha")


def write_curves_csv(path: str | os.PathLike, curves: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_FIELDS)
        writer.writeheader()
        for row in curves:
            writer.writerow({k: row.get(k) for k in CURVE_FIELDS})


def write_eval_csv(path: str | os.PathLike, report: EvalReport):
    fields = ("episode", "reward", "length", "final_dist", "success")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in report.rows:
            writer.writerow({k: row[k] for k in fields})


def read_curves_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
