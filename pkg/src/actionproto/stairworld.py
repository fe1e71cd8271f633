"""Ballistic "Up the Stairs" simulator.

A cube robot rests on a flat run-up facing a staircase. Each motion command
launches it with an impulse in the forward-up plane; the flight is integrated
with a fixed step and every contact with the stairs is refined by bisection.
Landings are perfectly inelastic and a riser hit kills the forward velocity,
after which the cube drops straight down along the riser face.

Coordinates: ``y`` is the forward position of the cube centre, ``z`` the
height of its bottom face (0 on the ground), ``x`` is lateral and never moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .errors import ConfigError, NonConvergedFlight

OBS_NAMES = ("x", "y", "z", "qx", "qy", "qz", "qw", "d_obs")
IDENTITY_QUAT = (0.0, 0.0, 0.0, 1.0)

# riser crossings closer than this are not counted; keeps flush-against-riser
# resting positions from registering as "already past" the riser
_EDGE_TOL = 1e-9
_REFINE_TOL = 1e-9


@dataclass(frozen=True)
class StairGeometry:
    num_steps: int = 4
    step_height: float = 0.3
    step_depth: float = 0.4
    ground_extent: float = 1.0

    def __post_init__(self):
        if self.num_steps < 1:
            raise ConfigError("num_steps must be >= 1")
        for name in ("step_height", "step_depth", "ground_extent"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")

    def riser(self, i: int) -> float:
        """Forward coordinate of the riser face of step ``i`` (1-based)."""
        return self.ground_extent + (i - 1) * self.step_depth

    @property
    def end(self) -> float:
        """Forward end of the last tread; beyond it lies the top platform."""
        return self.ground_extent + self.num_steps * self.step_depth

    @property
    def top_height(self) -> float:
        return self.num_steps * self.step_height

    def level_under(self, front: float) -> int:
        """Highest step index whose tread lies strictly behind ``front``.

        For a cube whose front face is at ``front`` this is the step its
        footprint rests on (the terrain is non-decreasing in y).
        """
        u = (front - _EDGE_TOL - self.ground_extent) / self.step_depth
        if u <= 0.0:
            return 0
        return min(self.num_steps, math.ceil(u))


@dataclass(frozen=True)
class SimConfig:
    gravity: float = 9.81
    robot_mass: float = 1.0
    robot_half_size: float = 0.1
    angle_min: float = 0.3
    angle_max: float = 1.45
    mag_min: float = 0.5
    mag_max: float = 7.0
    dt: float = 0.01
    max_flight_time: float = 10.0
    geometry: StairGeometry = field(default_factory=StairGeometry)
    episode_max_jumps: int = 100
    start_forward: float = 0.5
    obstacle_sentinel: float = 10.0

    def __post_init__(self):
        for name in ("gravity", "robot_mass", "robot_half_size", "dt",
                     "max_flight_time", "episode_max_jumps", "start_forward",
                     "obstacle_sentinel", "angle_max", "mag_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.angle_min < 0 or self.mag_min < 0:
            raise ConfigError("motion bounds must be non-negative")
        if not self.angle_min < self.angle_max <= math.pi / 2:
            raise ConfigError("need 0 <= angle_min < angle_max <= pi/2")
        if not self.mag_min < self.mag_max:
            raise ConfigError("need mag_min < mag_max")
        front = self.start_forward + self.robot_half_size
        if self.start_forward < self.robot_half_size or front > self.geometry.ground_extent:
            raise ConfigError("start position must lie on the ground run-up")

    @property
    def motion_low(self) -> tuple[float, float]:
        return (self.angle_min, self.mag_min)

    @property
    def motion_high(self) -> tuple[float, float]:
        return (self.angle_max, self.mag_max)

    def with_steps(self, num_steps: int) -> "SimConfig":
        return replace(self, geometry=replace(self.geometry, num_steps=num_steps))


class MotionCommand(NamedTuple):
    angle: float
    magnitude: float


@dataclass(frozen=True)
class RobotState:
    pos_lateral: float
    pos_forward: float
    pos_up: float
    orientation: tuple[float, float, float, float]
    dist_obstacle: float
    jumps: int = 0

    def observation_vector(self) -> tuple[float, ...]:
        return (self.pos_lateral, self.pos_forward, self.pos_up,
                *self.orientation, self.dist_obstacle)


@dataclass(frozen=True)
class Trajectory:
    """Waypoints ``(t, y, z)`` of one jump, starting at the pre-jump pose."""

    points: tuple[tuple[float, float, float], ...]

    def to_csv(self) -> str:
        lines = ["t,y,z"]
        lines += [f"{t!r},{y!r},{z!r}" for t, y, z in self.points]
        return "\n".join(lines) + "\n"

    @property
    def apex(self) -> float:
        return max(p[2] for p in self.points)


def reward(delta_z: float, step_height: float) -> float:
    """+1 for any height gain, minus the number of steps fallen otherwise."""
    if delta_z > 0:
        return 1.0
    return delta_z / step_height


def distance_to_obstacle(pos_forward: float, pos_up: float,
                         config: SimConfig) -> float:
    geom = config.geometry
    level = int(round(pos_up / geom.step_height))
    if level >= geom.num_steps:
        return config.obstacle_sentinel
    gap = geom.riser(level + 1) - (pos_forward + config.robot_half_size)
    return max(gap, 0.0)


class StairWorld:
    """Stateless simulator; all episode state lives in :class:`RobotState`."""

    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()

    def reset(self) -> RobotState:
        return self._rest_state(self.config.start_forward, 0.0, jumps=0)

    def _rest_state(self, y: float, z: float, jumps: int) -> RobotState:
        return RobotState(0.0, y, z, IDENTITY_QUAT,
                          distance_to_obstacle(y, z, self.config), jumps)

    def in_bounds(self, m: MotionCommand) -> bool:
        c = self.config
        return (c.angle_min <= m.angle <= c.angle_max
                and c.mag_min <= m.magnitude <= c.mag_max)

    def step(self, state: RobotState, m: MotionCommand, *, record: bool = True,
             check_bounds: bool = True):
        """Execute one jump.

        Returns ``(new_state, trajectory, reward, done)``. With
        ``record=False`` the trajectory only holds the contact events.
        """
        if check_bounds and not self.in_bounds(m):
            raise ValueError(f"motion {m} outside motion bounds")
        c = self.config
        speed = m.magnitude / c.robot_mass
        vy = speed * math.cos(m.angle)
        vz = speed * math.sin(m.angle)
        y, z, traj = self.fly(state.pos_forward, state.pos_up, vy, vz, record=record)
        sh = c.geometry.step_height
        # resting heights are whole treads; difference the tread indices so
        # float noise in z never turns "same level" into a tiny penalty
        level = round(z / sh)
        dz = (level - round(state.pos_up / sh)) * sh
        new = self._rest_state(y, z, state.jumps + 1)
        done = (level >= c.geometry.num_steps
                or new.jumps >= c.episode_max_jumps)
        return new, traj, reward(dz, c.geometry.step_height), done

    def fly(self, y0: float, z0: float, vy: float, vz: float, *,
            record: bool = True) -> tuple[float, float, Trajectory]:
        """Integrate one ballistic flight until the cube comes to rest."""
        c = self.config
        geom = c.geometry
        g = c.gravity
        h = c.robot_half_size
        sh = geom.step_height

        # current ballistic segment: launched at time ts from (ys, zs)
        ts, ys, zs = 0.0, y0, z0
        points = [(0.0, y0, z0)]

        def pos(t):
            tau = t - ts
            return ys + vy * tau, zs + vz * tau - 0.5 * g * tau * tau

        def penetrating(yy, zz):
            return zz < sh * geom.level_under(yy + h)

        t = 0.0
        while True:
            if t > c.max_flight_time:
                raise NonConvergedFlight(
                    f"flight exceeded {c.max_flight_time}s (gravity={g})")
            t1 = t + c.dt
            y1, z1 = pos(t1)
            if not penetrating(y1, z1):
                if record:
                    points.append((t1, y1, z1))
                t = t1
                continue

            ta, tb = t, t1
            ya, za = pos(ta)
            yb, zb = y1, z1
            for _ in range(200):
                if abs(yb - ya) <= _REFINE_TOL and abs(zb - za) <= _REFINE_TOL:
                    break
                tm = 0.5 * (ta + tb)
                ym, zm = pos(tm)
                if penetrating(ym, zm):
                    tb, yb, zb = tm, ym, zm
                else:
                    ta, ya, za = tm, ym, zm

            if geom.level_under(yb + h) > geom.level_under(ya + h):
                # riser hit: snap flush to the riser face, keep falling
                r = geom.riser(geom.level_under(ya + h) + 1)
                vz = vz - g * (ta - ts)
                ts, ys, zs = ta, r - h, za
                vy = 0.0
                _append(points, (ta, ys, zs))
                t = ta
                continue

            z_rest = sh * geom.level_under(ya + h)
            _append(points, (ta, ya, z_rest))
            return ya, z_rest, Trajectory(tuple(points))


def _append(points, p):
    if p[0] > points[-1][0]:
        points.append(p)
    else:
        points[-1] = (points[-1][0], p[1], p[2])


def max_return(num_steps: int) -> float:
    """Best achievable undiscounted return: one reward unit per step climbed."""
    return float(num_steps)
