"""Top-down orthographic rendering of the pushing scene.

Shapes are composited back to front (background, active goal marker, object,
pusher) using signed-distance coverage with one-pixel antialiasing. The
camera maps the workspace rectangle onto the image, shifted by the episode's
camera offset; row 0 is the +y edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import VisualDraw, WorldState, signed_distance


@dataclass(frozen=True)
class RenderSpec:
    width: int = 64
    height: int = 64
    workspace: tuple = (0.36, 0.27)
    goal_radius: float = 0.015
    pusher_radius: float = 0.008


def pixel_grid(spec: RenderSpec, camera_offset=(0.0, 0.0)):
    """World coordinates of pixel centers as (X, Y) arrays (H, W)."""
    w, h = spec.workspace
    xs = (np.arange(spec.width) + 0.5) / spec.width * w - w / 2 + camera_offset[0]
    ys = h / 2 - (np.arange(spec.height) + 0.5) / spec.height * h + camera_offset[1]
    return np.meshgrid(xs, ys)


def _coverage(sd: np.ndarray, edge: float) -> np.ndarray:
    return np.clip(0.5 - sd / edge, 0.0, 1.0)


def object_mask(state: WorldState, spec: RenderSpec, camera_offset=(0.0, 0.0)) -> np.ndarray:
    """Boolean mask of pixels whose center lies inside the object."""
    X, Y = pixel_grid(spec, camera_offset)
    return signed_distance(state.shape, state.object_pos, state.object_theta, X, Y) <= 0.0


def render_visual(state: WorldState, draw: VisualDraw, spec: RenderSpec) -> np.ndarray:
    """(H, W, 3) float32 image in [0, 1]."""
    X, Y = pixel_grid(spec, draw.camera_offset)
    edge = spec.workspace[0] / spec.width

    img = np.empty((spec.height, spec.width, 3), dtype=np.float64)
    img[:] = draw.background_color

    goal = state.goals[state.goal_index]
    sd_goal = np.hypot(X - goal[0], Y - goal[1]) - spec.goal_radius
    a = _coverage(sd_goal, edge)[..., None] * 0.85
    img = img * (1 - a) + draw.goal_color * a

    sd_obj = signed_distance(state.shape, state.object_pos, state.object_theta, X, Y)
    a = _coverage(sd_obj, edge)[..., None]
    img = img * (1 - a) + draw.object_color * a

    sd_tcp = np.hypot(X - state.tcp[0], Y - state.tcp[1]) - spec.pusher_radius
    a = _coverage(sd_tcp, edge)[..., None]
    img = img * (1 - a) + draw.pusher_color * a

    return np.clip(img * draw.brightness, 0.0, 1.0).astype(np.float32)
