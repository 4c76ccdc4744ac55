"""Simulated contact-depth tactile sensing.

The sensor is a flat rectangular face embedded in the pusher tip. A virtual
depth camera sits ``standoff`` behind the face center and looks along the
sensor heading; each image column casts one ray from the camera plane at a
lateral offset across the tip width and records the distance to the first
object surface, clipped to [0, standoff]. Columns that miss report the
standoff (the no-contact reference).

The world is planar, so the vertical image axis follows a 2.5D convention:
the object is treated as a vertical prism spanning a fixed central band of
the tip height. Rows inside the band replicate the lateral depth profile;
rows outside stay at the reference depth.

Contact depth normalizes penetration of the face plane: an object pressed
``delta`` into the face reads ``delta / d_max``, clipped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SensorGeometry:
    tip_width: float = 0.024
    tip_height: float = 0.024
    standoff: float = 0.006
    d_max: float = 0.005
    rows: int = 64
    cols: int = 64
    band_fraction: float = 0.6


@dataclass
class SensorScene:
    """Sensing face pose plus the object it may touch. ``sensor_pos`` is the
    face center in world coordinates; ``heading`` points out of the face."""

    sensor_pos: np.ndarray
    heading: float
    shape: object  # world.ObjectShape
    object_pos: np.ndarray
    object_theta: float


def reference_depth(geometry: SensorGeometry) -> np.ndarray:
    """Depth image with no object present: every pixel at the standoff."""
    return np.full((geometry.rows, geometry.cols), geometry.standoff, dtype=np.float64)


def _ray_disc(ox, oy, dx, dy, cx, cy, radius):
    """Smallest t >= 0 where the ray enters the disc; inf on miss.
    Rays starting inside return 0."""
    fx, fy = cx - ox, cy - oy
    beta = fx * dx + fy * dy
    gamma = fx * fx + fy * fy - radius * radius
    disc = beta * beta - gamma
    t = np.full_like(ox, np.inf)
    hit = disc >= 0.0
    root = np.sqrt(np.maximum(disc, 0.0))
    enter = beta - root
    exit_ = beta + root
    valid = hit & (exit_ >= 0.0)  # exit behind origin means the disc is behind
    t = np.where(valid, np.maximum(enter, 0.0), t)
    return t


def _ray_exit_circle(ox, oy, dx, dy, cx, cy, radius):
    """t >= 0 where a ray starting inside the circle crosses it outward."""
    fx, fy = cx - ox, cy - oy
    beta = fx * dx + fy * dy
    gamma = fx * fx + fy * fy - radius * radius
    disc = np.maximum(beta * beta - gamma, 0.0)
    return beta + np.sqrt(disc)


def _ray_box(ox, oy, dx, dy, cx, cy, theta, hw, hh):
    """Slab-method entry distance into an oriented box; inf on miss."""
    c, s = np.cos(theta), np.sin(theta)
    # ray in box frame
    px = c * (ox - cx) + s * (oy - cy)
    py = -s * (ox - cx) + c * (oy - cy)
    qx = c * dx + s * dy
    qy = -s * dx + c * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-hw - px) / qx
        t2 = (hw - px) / qx
        t3 = (-hh - py) / qy
        t4 = (hh - py) / qy
    txn, txf = np.minimum(t1, t2), np.maximum(t1, t2)
    tyn, tyf = np.minimum(t3, t4), np.maximum(t3, t4)
    # parallel rays: inside the slab forever, outside never
    parallel_x = np.abs(qx) < 1e-15
    inside_x = np.abs(px) <= hw
    txn = np.where(parallel_x, np.where(inside_x, -np.inf, np.inf), txn)
    txf = np.where(parallel_x, np.where(inside_x, np.inf, -np.inf), txf)
    parallel_y = np.abs(qy) < 1e-15
    inside_y = np.abs(py) <= hh
    tyn = np.where(parallel_y, np.where(inside_y, -np.inf, np.inf), tyn)
    tyf = np.where(parallel_y, np.where(inside_y, np.inf, -np.inf), tyf)
    tn = np.maximum(txn, tyn)
    tf = np.minimum(txf, tyf)
    hit = (tn <= tf) & (tf >= 0.0)
    return np.where(hit, np.maximum(tn, 0.0), np.inf)


def _ray_annulus(ox, oy, dx, dy, cx, cy, ri, ro):
    """Entry distance into the ring between radii ri and ro; inf on miss.

    The ring material touches the outer circle everywhere, so a ray from
    outside enters at the outer-circle crossing. A ray starting inside the
    hole enters where it exits the inner circle; one starting in the ring
    enters at 0.
    """
    r0 = np.hypot(cx - ox, cy - oy)
    outer = _ray_disc(ox, oy, dx, dy, cx, cy, ro)
    in_hole = r0 < ri
    in_ring = (r0 >= ri) & (r0 <= ro)
    exit_inner = _ray_exit_circle(ox, oy, dx, dy, cx, cy, ri)
    t = np.where(in_hole, exit_inner, outer)
    t = np.where(in_ring, 0.0, t)
    return t


def render_depth(scene: SensorScene, geometry: SensorGeometry) -> np.ndarray:
    """Depth image (rows x cols), distances along the heading from the camera
    plane, clipped to [0, standoff]."""
    pose = np.concatenate(
        [np.atleast_1d(scene.sensor_pos).ravel(), [scene.heading], np.atleast_1d(scene.object_pos).ravel(), [scene.object_theta]]
    )
    if not np.all(np.isfinite(pose)):
        raise ValueError("non-finite pose in sensor scene")

    g = geometry
    h = np.array([np.cos(scene.heading), np.sin(scene.heading)])
    n = np.array([-h[1], h[0]])  # column axis
    u = (np.arange(g.cols, dtype=np.float64) + 0.5) / g.cols - 0.5
    u *= g.tip_width
    origin = scene.sensor_pos - g.standoff * h
    ox = origin[0] + u * n[0]
    oy = origin[1] + u * n[1]
    dx = np.full(g.cols, h[0])
    dy = np.full(g.cols, h[1])

    shape = scene.shape
    cx, cy = float(scene.object_pos[0]), float(scene.object_pos[1])
    if shape.kind == "disc":
        t = _ray_disc(ox, oy, dx, dy, cx, cy, shape.dims[0])
    elif shape.kind == "box":
        t = _ray_box(ox, oy, dx, dy, cx, cy, scene.object_theta, *shape.dims)
    elif shape.kind == "annulus":
        t = _ray_annulus(ox, oy, dx, dy, cx, cy, *shape.dims)
    else:
        raise ValueError(f"unknown object kind {shape.kind!r}")

    profile = np.clip(t, 0.0, g.standoff)

    depth = np.full((g.rows, g.cols), g.standoff, dtype=np.float64)
    v = (np.arange(g.rows, dtype=np.float64) + 0.5) / g.rows - 0.5
    v *= g.tip_height
    band = np.abs(v) <= g.band_fraction * g.tip_height / 2.0
    depth[band] = profile
    return depth


def contact_depth(depth: np.ndarray, reference: np.ndarray, d_max: float) -> np.ndarray:
    """Normalized penetration image in [0, 1]: (reference - depth) / d_max."""
    if depth.shape != reference.shape:
        raise ValueError(f"depth {depth.shape} vs reference {reference.shape}")
    return np.clip((reference - depth) / d_max, 0.0, 1.0)


def render_contact(scene: SensorScene, geometry: SensorGeometry) -> np.ndarray:
    """Convenience: render depth and normalize against the no-contact
    reference; float32 image in [0, 1]."""
    depth = render_depth(scene, geometry)
    ref = reference_depth(geometry)
    return contact_depth(depth, ref, geometry.d_max).astype(np.float32)
