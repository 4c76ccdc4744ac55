"""Planar pushing world: rigid object, disc pusher, waypoint goal trajectories.

Physics is a penalty-based contact model integrated with semi-implicit Euler
at a fixed substep. The pusher (TCP) is kinematic: each control step moves it
by a clamped displacement split over K substeps; the object responds to
spring-damper contact forces and viscous ground friction. All randomness runs
through explicit numpy Generators, so a fixed seed replays bit-identically.

Units are SI (meters, seconds, kilograms); angles are radians, counter-
clockwise positive.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .noise import GradientNoise
from .tactile import SensorGeometry, SensorScene, render_contact


# -- object geometry ------------------------------------------------------------


@dataclass
class ObjectShape:
    """Pushable rigid body: a disc, an axis-aligned box, or an annulus.

    ``dims``: disc (radius,), box (half_width, half_height),
    annulus (inner_radius, outer_radius).
    ``ground_friction`` is a viscous rate (1/s) applied to both linear and
    angular velocity.
    """

    kind: str
    dims: tuple
    mass: float = 0.1
    ground_friction: float = 40.0

    def __post_init__(self):
        if self.kind not in ("disc", "box", "annulus"):
            raise ValueError(f"unknown object kind {self.kind!r}")
        if self.kind == "annulus" and not self.dims[0] < self.dims[1]:
            raise ValueError("annulus needs inner radius < outer radius")
        if any(d <= 0 for d in self.dims) or self.mass <= 0:
            raise ValueError("dimensions and mass must be positive")

    @property
    def moment_of_inertia(self) -> float:
        m = self.mass
        if self.kind == "disc":
            return 0.5 * m * self.dims[0] ** 2
        if self.kind == "box":
            hw, hh = self.dims
            return m * (hw * hw + hh * hh) / 3.0
        ri, ro = self.dims
        return 0.5 * m * (ri * ri + ro * ro)

    @property
    def bounding_radius(self) -> float:
        if self.kind == "disc":
            return self.dims[0]
        if self.kind == "box":
            return float(np.hypot(*self.dims))
        return self.dims[1]


def signed_distance(shape: ObjectShape, pos, theta: float, px, py):
    """Signed distance from points (px, py) to the object's solid region.

    Negative inside the material. Vectorized; used by the rasterizer and by
    membership tests.
    """
    px = np.asarray(px, dtype=np.float64) - pos[0]
    py = np.asarray(py, dtype=np.float64) - pos[1]
    if shape.kind == "disc":
        return np.hypot(px, py) - shape.dims[0]
    if shape.kind == "box":
        c, s = np.cos(theta), np.sin(theta)
        qx = c * px + s * py
        qy = -s * px + c * py
        dx = np.abs(qx) - shape.dims[0]
        dy = np.abs(qy) - shape.dims[1]
        outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
        inside = np.minimum(np.maximum(dx, dy), 0.0)
        return outside + inside
    ri, ro = shape.dims
    mid = 0.5 * (ri + ro)
    half = 0.5 * (ro - ri)
    return np.abs(np.hypot(px, py) - mid) - half


def contact_query(shape: ObjectShape, pos, theta: float, p):
    """Signed distance and outward unit normal from object material to ``p``."""
    d = np.asarray(p, dtype=np.float64) - np.asarray(pos, dtype=np.float64)
    if shape.kind == "disc":
        r = float(np.hypot(d[0], d[1]))
        n = d / r if r > 1e-12 else np.array([1.0, 0.0])
        return r - shape.dims[0], n
    if shape.kind == "box":
        hw, hh = shape.dims
        c, s = np.cos(theta), np.sin(theta)
        qx = c * d[0] + s * d[1]
        qy = -s * d[0] + c * d[1]
        cx = min(max(qx, -hw), hw)
        cy = min(max(qy, -hh), hh)
        if qx != cx or qy != cy:  # outside: normal from closest boundary point
            ex, ey = qx - cx, qy - cy
            dist = float(np.hypot(ex, ey))
            nl = np.array([ex / dist, ey / dist])
            sd = dist
        else:  # inside: exit through the nearest face
            gaps = np.array([hw - qx, qx + hw, hh - qy, qy + hh])
            k = int(np.argmin(gaps))
            nl = np.array([(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)][k])
            sd = -float(gaps[k])
        n = np.array([c * nl[0] - s * nl[1], s * nl[0] + c * nl[1]])
        return sd, n
    ri, ro = shape.dims
    r = float(np.hypot(d[0], d[1]))
    radial = d / r if r > 1e-12 else np.array([1.0, 0.0])
    if r >= ro:
        return r - ro, radial
    if r <= ri:
        return ri - r, -radial
    if ro - r <= r - ri:
        return -(ro - r), radial
    return -(r - ri), -radial


# -- configuration ----------------------------------------------------------------


@dataclass
class TrajectoryParams:
    """Goal polyline controls. ``heading_gain`` is the maximum curvature
    contribution of the noise field in radians; gain 0 gives a straight line."""

    n_points: int = 7
    step_len: float = 0.03
    heading_gain: float = 0.5
    frequency: float = 0.1
    margin: float = 0.05
    max_tries: int = 100
    base_heading: Optional[float] = None  # None samples uniformly


@dataclass
class RandomizationConfig:
    enabled: bool = True
    mass_range: tuple = (0.08, 0.12)
    friction_range: tuple = (32.0, 48.0)
    hue_jitter: float = 0.05
    brightness_jitter: float = 0.1
    background_jitter: float = 0.04
    camera_jitter: float = 0.002  # fraction of workspace extent


@dataclass
class VisualDraw:
    """Per-episode appearance: colors, brightness scale, camera offset."""

    object_color: np.ndarray
    pusher_color: np.ndarray
    background_color: np.ndarray
    goal_color: np.ndarray
    brightness: float = 1.0
    camera_offset: np.ndarray = field(default_factory=lambda: np.zeros(2))


_BASE_COLORS = {
    "object": np.array([0.80, 0.22, 0.16]),
    "pusher": np.array([0.22, 0.45, 0.85]),
    "background": np.array([0.16, 0.17, 0.19]),
    "goal": np.array([0.20, 0.75, 0.35]),
}


def default_draw() -> VisualDraw:
    return VisualDraw(
        object_color=_BASE_COLORS["object"].copy(),
        pusher_color=_BASE_COLORS["pusher"].copy(),
        background_color=_BASE_COLORS["background"].copy(),
        goal_color=_BASE_COLORS["goal"].copy(),
    )


def sample_draw(rng: np.random.Generator, rc: RandomizationConfig) -> VisualDraw:
    if not rc.enabled:
        return default_draw()

    def jitter(base, amount):
        return np.clip(base + rng.uniform(-amount, amount, 3), 0.0, 1.0)

    return VisualDraw(
        object_color=jitter(_BASE_COLORS["object"], rc.hue_jitter),
        pusher_color=jitter(_BASE_COLORS["pusher"], rc.hue_jitter),
        background_color=jitter(_BASE_COLORS["background"], rc.background_jitter),
        goal_color=jitter(_BASE_COLORS["goal"], rc.hue_jitter),
        brightness=1.0 + rng.uniform(-rc.brightness_jitter, rc.brightness_jitter),
        camera_offset=rng.uniform(-rc.camera_jitter, rc.camera_jitter, 2),
    )


@dataclass
class WorldConfig:
    object: ObjectShape = field(default_factory=lambda: ObjectShape("box", (0.05, 0.035)))
    # 0.36 m across 64 px keeps the 16 mm pusher tip and contact gaps a few
    # pixels wide; a desk-mat scene rather than a whole tabletop
    workspace: tuple = (0.36, 0.27)
    dt: float = 0.002
    substeps: int = 10
    max_tcp_step: float = 0.005
    max_episode_steps: int = 350
    success_threshold: float = 0.025
    pusher_radius: float = 0.008
    contact_stiffness: float = 600.0
    contact_damping: float = 15.0
    image_size: int = 64
    frame_stack: int = 3
    tcp_spawn_gap: tuple = (0.005, 0.025)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    sensor: SensorGeometry = field(default_factory=SensorGeometry)

    @property
    def half_extent(self) -> tuple:
        return (self.workspace[0] / 2.0, self.workspace[1] / 2.0)


@dataclass
class WorldState:
    """Complete simulation state; replaying identical actions from an equal
    state reproduces trajectories bit-for-bit."""

    object_pos: np.ndarray
    object_theta: float
    object_vel: np.ndarray
    object_omega: float
    tcp: np.ndarray
    goals: np.ndarray  # (n, 2) waypoints, excluding the start anchor
    goal_index: int
    step_count: int
    shape: ObjectShape

    def copy(self) -> "WorldState":
        return WorldState(
            self.object_pos.copy(),
            self.object_theta,
            self.object_vel.copy(),
            self.object_omega,
            self.tcp.copy(),
            self.goals.copy(),
            self.goal_index,
            self.step_count,
            dataclasses.replace(self.shape),
        )


@dataclass
class Observation:
    """Frame stacks ordered oldest to newest; proprio is (tcp_x, tcp_y, vel_x,
    vel_y) normalized by workspace half-extents and the per-step speed cap."""

    visual: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    tactile: np.ndarray  # (N, H, W) float32 in [0, 1]
    proprio: np.ndarray  # (4,) float32


# -- goal trajectories --------------------------------------------------------------


def generate_trajectory(
    rng: np.random.Generator,
    start: np.ndarray,
    params: TrajectoryParams,
    workspace: tuple,
    base_heading: float,
) -> Optional[np.ndarray]:
    """One polyline attempt: consecutive points exactly ``step_len`` apart,
    headings driven by a coherent noise field. Returns None if any point
    leaves the workspace margin."""
    noise = GradientNoise(int(rng.integers(0, 2**31)))
    anchor = rng.uniform(0.0, 1000.0)
    pts = np.empty((params.n_points, 2))
    pts[0] = start
    hx, hy = workspace[0] / 2 - params.margin, workspace[1] / 2 - params.margin
    for k in range(params.n_points - 1):
        heading = base_heading + params.heading_gain * noise(k * params.frequency, anchor)
        pts[k + 1] = pts[k] + params.step_len * np.array([np.cos(heading), np.sin(heading)])
        if abs(pts[k + 1, 0]) > hx or abs(pts[k + 1, 1]) > hy:
            return None
    return pts


def sample_episode_layout(rng: np.random.Generator, cfg: WorldConfig) -> np.ndarray:
    """Sample an object start and goal polyline fully inside the margin.
    Raises after ``max_tries`` failed attempts."""
    tp = cfg.trajectory
    hx, hy = cfg.half_extent
    for _ in range(tp.max_tries):
        start = np.array(
            [
                rng.uniform(-hx + tp.margin, hx - tp.margin),
                rng.uniform(-hy + tp.margin, hy - tp.margin),
            ]
        )
        if tp.base_heading is None:
            # bias the base heading toward the far side so long paths fit
            toward_center = np.arctan2(-start[1], -start[0])
            base = toward_center + rng.uniform(-0.9, 0.9)
        else:
            base = tp.base_heading
        pts = generate_trajectory(rng, start, tp, cfg.workspace, base)
        if pts is not None:
            return pts
    raise RuntimeError(f"no in-bounds goal trajectory found in {tp.max_tries} attempts")


# -- physics ---------------------------------------------------------------------


def physics_step(state: WorldState, tcp_displacement: np.ndarray, dt: float, cfg: WorldConfig) -> WorldState:
    """One substep: move the TCP kinematically, resolve pusher-object contact
    with a spring-damper penalty force, damp velocities, integrate.

    Returns a new WorldState; the input is not mutated.
    """
    s = state.copy()
    shape = s.shape
    hx, hy = cfg.half_extent
    new_tcp = s.tcp + tcp_displacement
    new_tcp[0] = min(max(new_tcp[0], -hx), hx)
    new_tcp[1] = min(max(new_tcp[1], -hy), hy)
    tcp_vel = (new_tcp - s.tcp) / dt
    s.tcp = new_tcp

    sd, normal = contact_query(shape, s.object_pos, s.object_theta, s.tcp)
    pen = cfg.pusher_radius - sd
    force = np.zeros(2)
    torque = 0.0
    if pen > 0.0:
        contact_pt = s.tcp - normal * sd
        r = contact_pt - s.object_pos
        v_cp = s.object_vel + s.object_omega * np.array([-r[1], r[0]])
        pen_rate = float(normal @ (v_cp - tcp_vel))  # d(penetration)/dt
        magnitude = cfg.contact_stiffness * pen + cfg.contact_damping * pen_rate
        if magnitude > 0.0:
            force = -normal * magnitude
            torque = r[0] * force[1] - r[1] * force[0]

    inv_m = 1.0 / shape.mass
    s.object_vel = s.object_vel + dt * force * inv_m
    s.object_omega = s.object_omega + dt * torque / shape.moment_of_inertia
    damp = max(0.0, 1.0 - shape.ground_friction * dt)
    s.object_vel = s.object_vel * damp
    s.object_omega = s.object_omega * damp
    s.object_pos = s.object_pos + dt * s.object_vel
    s.object_theta = s.object_theta + dt * s.object_omega
    return s


# -- environment ------------------------------------------------------------------


class PushWorld:
    """Episodic pushing environment with stacked visual and tactile frames."""

    def __init__(self, cfg: WorldConfig, seed: int = 0):
        self.cfg = cfg
        self._base_seed = seed
        self._episode = 0
        self.state: Optional[WorldState] = None
        self.draw: Optional[VisualDraw] = None
        self._frames_v: list = []
        self._frames_c: list = []
        self._last_action = np.zeros(2)

    # frame helpers ------------------------------------------------------------

    def _render_frames(self) -> tuple:
        from .raster import RenderSpec, render_visual

        spec = RenderSpec(
            self.cfg.image_size,
            self.cfg.image_size,
            self.cfg.workspace,
            pusher_radius=self.cfg.pusher_radius,
        )
        visual = render_visual(self.state, self.draw, spec)
        to_obj = self.state.object_pos - self.state.tcp
        dist = float(np.hypot(*to_obj))
        heading = float(np.arctan2(to_obj[1], to_obj[0])) if dist > 1e-9 else 0.0
        face = self.state.tcp + self.cfg.pusher_radius * np.array([np.cos(heading), np.sin(heading)])
        scene = SensorScene(face, heading, self.state.shape, self.state.object_pos, self.state.object_theta)
        tactile = render_contact(scene, self.cfg.sensor)
        return visual, tactile

    def _observation(self) -> Observation:
        hx, hy = self.cfg.half_extent
        vel = self._last_action / self.cfg.max_tcp_step
        proprio = np.array(
            [self.state.tcp[0] / hx, self.state.tcp[1] / hy, vel[0], vel[1]],
            dtype=np.float32,
        )
        return Observation(
            visual=np.stack(self._frames_v).astype(np.float32),
            tactile=np.stack(self._frames_c).astype(np.float32),
            proprio=proprio,
        )

    # gym-style API -------------------------------------------------------------

    def reset(self, seed: Optional[int] = None) -> Observation:
        if seed is not None:
            self._base_seed = seed
            self._episode = 0
        rng = np.random.default_rng(
            np.random.SeedSequence(self._base_seed, spawn_key=(self._episode,))
        )
        self._episode += 1
        cfg = self.cfg

        shape = dataclasses.replace(cfg.object)
        if cfg.randomization.enabled:
            shape.mass = float(rng.uniform(*cfg.randomization.mass_range))
            shape.ground_friction = float(rng.uniform(*cfg.randomization.friction_range))
        self.draw = sample_draw(rng, cfg.randomization)

        pts = sample_episode_layout(rng, cfg)
        start = pts[0]
        goals = pts[1:]

        to_goal = goals[0] - start
        ghat = to_goal / np.linalg.norm(to_goal)
        reach = support_distance(shape, 0.0, -ghat) + cfg.pusher_radius
        gap = rng.uniform(*cfg.tcp_spawn_gap)
        tcp = start - ghat * (reach + gap)
        hx, hy = cfg.half_extent
        tcp[0] = min(max(tcp[0], -hx), hx)
        tcp[1] = min(max(tcp[1], -hy), hy)

        self.state = WorldState(
            object_pos=start.astype(np.float64).copy(),
            object_theta=0.0,
            object_vel=np.zeros(2),
            object_omega=0.0,
            tcp=tcp.astype(np.float64),
            goals=goals.copy(),
            goal_index=0,
            step_count=0,
            shape=shape,
        )
        self._last_action = np.zeros(2)
        visual, tactile = self._render_frames()
        self._frames_v = [visual] * cfg.frame_stack
        self._frames_c = [tactile] * cfg.frame_stack
        return self._observation()

    def step(self, action: np.ndarray):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        cfg = self.cfg
        action = np.clip(np.asarray(action, dtype=np.float64), -cfg.max_tcp_step, cfg.max_tcp_step)
        sub = action / cfg.substeps
        s = self.state
        for _ in range(cfg.substeps):
            s = physics_step(s, sub, cfg.dt, cfg)
        s.step_count = self.state.step_count + 1
        self.state = s
        self._last_action = action

        terminated = False
        while True:
            d_goal = float(np.linalg.norm(s.object_pos - s.goals[s.goal_index]))
            if d_goal >= cfg.success_threshold:
                break
            if s.goal_index == len(s.goals) - 1:
                terminated = True
                break
            s.goal_index += 1

        d_tcp = float(np.linalg.norm(s.object_pos - s.tcp))
        reward = -(d_goal + d_tcp)
        truncated = (not terminated) and s.step_count >= cfg.max_episode_steps

        visual, tactile = self._render_frames()
        self._frames_v = self._frames_v[1:] + [visual]
        self._frames_c = self._frames_c[1:] + [tactile]
        info = {
            "d_goal": d_goal,
            "d_tcp": d_tcp,
            "goal_index": s.goal_index,
            "final_goal_dist": float(np.linalg.norm(s.object_pos - s.goals[-1])),
            "success": terminated,
        }
        return self._observation(), reward, terminated, truncated, info


def support_distance(shape: ObjectShape, theta: float, direction) -> float:
    """Distance from the object center to its boundary along ``direction``."""
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    if shape.kind == "disc":
        return shape.dims[0]
    if shape.kind == "annulus":
        return shape.dims[1]
    c, s = np.cos(theta), np.sin(theta)
    lx = abs(c * d[0] + s * d[1])
    ly = abs(-s * d[0] + c * d[1])
    hw, hh = shape.dims
    candidates = []
    if lx > 1e-12:
        candidates.append(hw / lx)
    if ly > 1e-12:
        candidates.append(hh / ly)
    return min(candidates)
