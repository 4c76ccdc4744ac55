"""Small-scale run of the visual-tactile agent, end to end.

Trains the full agent (cross-modal attention fusion plus the momentum
contrastive objective) on a shrunken 32x32 task for a few thousand steps,
then evaluates it against an untrained random policy. Takes a few minutes;
expect a clear reward trend rather than a solved task at this budget.

    python3 demos/contrastive_agent_smoke.py [out_dir]
"""

import sys
from pathlib import Path

from vitac.experiments import evaluate, write_curves_csv
from vitac.tactile import SensorGeometry
from vitac.vtcon import AgentConfig, run_vtcon_training
from vitac.world import ObjectShape, TrajectoryParams, WorldConfig

STEPS = 4000


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos/out/agent_smoke")
    out.mkdir(parents=True, exist_ok=True)

    world = WorldConfig(
        image_size=32,
        sensor=SensorGeometry(rows=32, cols=32),
        object=ObjectShape("disc", (0.045,)),
        trajectory=TrajectoryParams(heading_gain=0.0, n_points=4),
        max_episode_steps=150,
    )
    agent_cfg = AgentConfig(
        image_size=32,
        token_width=32,
        feature_dim=32,
        hidden=64,
        proprio_dims=(32, 16),
        batch_size=16,
        buffer_capacity=4000,
        warmup_steps=300,
        update_every=4,
    )

    print(f"training {STEPS} steps on ground-truth touch ...")
    result = run_vtcon_training(world, agent_cfg, steps=STEPS, seed=1, log=print)
    write_curves_csv(out / "curves.csv", result.curves)

    first = [c["reward"] for c in result.curves[:5]]
    last = [c["reward"] for c in result.curves[-5:]]
    print(f"mean episode reward, first 5 episodes {sum(first) / len(first):.1f} "
          f"-> last 5 episodes {sum(last) / len(last):.1f}")

    agent_report = evaluate(result.agent, world, episodes=10, seed=500)
    random_report = evaluate(None, world, episodes=10, seed=500)
    print(f"trained agent: {agent_report.summary()}")
    print(f"random policy: {random_report.summary()}")
    print(f"wrote per-episode curves to {out / 'curves.csv'}")


if __name__ == "__main__":
    main()
