"""Scripted pushing controller used for demonstrations and data collection.

Behavior has two phases decided by where the TCP sits relative to the push
line. Inside an alignment cone behind the object (opposite the active goal),
the expert chases a contact target placed just inside the object surface on
the goal line, which presses the pusher into sustained contact and steers the
object toward the goal. Outside the cone it orbits the object on an inflated
safety circle, along the shorter angular direction, until aligned.
"""

from __future__ import annotations

import numpy as np

from .world import WorldConfig, WorldState, support_distance

PUSH_BIAS = 0.0015  # how deep the chased target sits inside the surface
CLEARANCE = 0.012  # orbit margin around the object
CONE_COS = np.cos(np.deg2rad(40.0))  # alignment cone half-angle
GAIN = 1.0  # proportional gain toward the target, per control step


def scripted_expert(state: WorldState, cfg: WorldConfig) -> np.ndarray:
    """TCP displacement for one control step, shape (2,), within the step cap."""
    obj = state.object_pos
    goal = state.goals[state.goal_index]
    to_goal = goal - obj
    d_goal = float(np.hypot(*to_goal))
    at_last = state.goal_index == len(state.goals) - 1
    if d_goal < 1e-9 or (at_last and d_goal < cfg.success_threshold):
        return np.zeros(2)
    ghat = to_goal / d_goal
    behind = -ghat

    reach = support_distance(state.shape, state.object_theta, behind) + cfg.pusher_radius
    target = obj + behind * (reach - PUSH_BIAS)

    rel = state.tcp - obj
    r_tcp = float(np.hypot(*rel))
    if r_tcp < 1e-9:
        radial = behind
        r_tcp = 1e-9
    else:
        radial = rel / r_tcp

    if radial @ behind >= CONE_COS:
        return np.clip(GAIN * (target - state.tcp), -cfg.max_tcp_step, cfg.max_tcp_step)

    # orbit the safety circle along the shorter angular way to the back side
    safe_r = state.shape.bounding_radius + cfg.pusher_radius + CLEARANCE
    side = 1.0 if radial[0] * behind[1] - radial[1] * behind[0] > 0.0 else -1.0
    tangent = side * np.array([-radial[1], radial[0]])
    step = tangent * cfg.max_tcp_step + radial * (safe_r - r_tcp)
    return np.clip(step, -cfg.max_tcp_step, cfg.max_tcp_step)
