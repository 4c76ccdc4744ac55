"""Watch the scripted expert push a disc along a straight goal line.

Runs one seeded episode, prints a progress trace, and writes a filmstrip of
camera frames next to the matching tactile frames.

    python3 demos/expert_rollout.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from vitac.expert import scripted_expert
from vitac.images import write_pgm, write_ppm
from vitac.world import ObjectShape, PushWorld, TrajectoryParams, WorldConfig


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos/out/expert_rollout")
    out.mkdir(parents=True, exist_ok=True)

    cfg = WorldConfig(
        object=ObjectShape("disc", (0.045,)),
        trajectory=TrajectoryParams(heading_gain=0.0, n_points=6),
    )
    env = PushWorld(cfg, seed=7)
    obs = env.reset()

    frames, touches = [obs.visual[-1]], [obs.tactile[-1]]
    total = 0.0
    while True:
        action = scripted_expert(env.state, env.cfg)
        obs, reward, terminated, truncated, info = env.step(action)
        total += reward
        if env.state.step_count % 25 == 0 or terminated or truncated:
            frames.append(obs.visual[-1])
            touches.append(obs.tactile[-1])
            print(
                f"step {env.state.step_count:3d}  waypoint {info['goal_index'] + 1}/{len(env.state.goals)}"
                f"  d_goal {info['d_goal'] * 100.0:5.2f} cm  d_tcp {info['d_tcp'] * 100.0:5.2f} cm"
            )
        if terminated or truncated:
            break

    verdict = "success" if info["success"] else "failure"
    print(f"{verdict} in {env.state.step_count} steps, return {total:.2f}, "
          f"final goal distance {info['final_goal_dist'] * 100.0:.2f} cm")

    write_ppm(out / "camera_strip.ppm", np.concatenate(frames, axis=1))
    write_pgm(out / "tactile_strip.pgm", np.concatenate(touches, axis=1))
    print(f"wrote camera_strip.ppm and tactile_strip.pgm to {out}")


if __name__ == "__main__":
    main()
