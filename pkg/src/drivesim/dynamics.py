"""Vehicle state propagation.

Two models are supported:

* classic: kinematic bicycle about the center of gravity with rear-axle
  offset l_r = 0.5 L, so the slip angle is beta = atan(0.5 tan(delta)).
  Length-dependent; not exactly invertible.
* invertible: double-integrator in position/velocity whose yaw advances by
  steering * displacement. Length-independent, and its (acceleration,
  steering) action is recoverable from two consecutive states, which makes
  it the model of choice for imitating logged trajectories.

Both steppers are pure functions; the ``*_arr`` variants advance whole
agent arrays in place for the batched engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fastpath as _fp
from .geometry import Vec2, wrap_angle, wrap_angle_arr

DEFAULT_ACCEL_BOUNDS = (-4.0, 4.0)     # m/s^2
DEFAULT_STEER_BOUNDS = (-0.7, 0.7)     # rad (classic) / 1/m-ish (invertible)
DEFAULT_V_MAX = 100.0                  # m/s
DEGENERATE_DISPLACEMENT = 1e-9         # below this, steering is unidentifiable


@dataclass
class AgentState:
    position: Vec2
    heading: float          # radians in (-pi, pi]
    speed: float            # m/s, signed under the classic model
    velocity: Vec2 = None   # derived: speed * (cos heading, sin heading)

    def __post_init__(self):
        if self.velocity is None:
            self.velocity = Vec2(self.speed * math.cos(self.heading),
                                 self.speed * math.sin(self.heading))


@dataclass
class Action:
    acceleration: float = 0.0
    steering: float = 0.0
    head_rotation: float = 0.0  # rad/s, view-cone control only


@dataclass
class VehicleParams:
    length: float
    v_max: float = DEFAULT_V_MAX

    @property
    def l_r(self) -> float:
        return 0.5 * self.length


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def step_classic(state: AgentState, action: Action, dt: float,
                 params: VehicleParams,
                 accel_bounds=DEFAULT_ACCEL_BOUNDS,
                 steer_bounds=DEFAULT_STEER_BOUNDS) -> AgentState:
    """One Euler step of the kinematic bicycle about the center of gravity.

    v_dot = a
    v_bar = clip(v + 0.5 v_dot dt, -v_max, v_max)
    beta  = atan(0.5 tan(delta))
    x_dot = v_bar cos(theta + beta);  y_dot = v_bar sin(theta + beta)
    theta_dot = v_bar cos(beta) tan(delta) / L
    """
    a = _clip(action.acceleration, *accel_bounds)
    delta = _clip(action.steering, *steer_bounds)
    v = state.speed
    v_max = params.v_max

    v_dot = a
    v_bar = _clip(v + 0.5 * v_dot * dt, -v_max, v_max)
    beta = math.atan(0.5 * math.tan(delta))
    x_dot = v_bar * math.cos(state.heading + beta)
    y_dot = v_bar * math.sin(state.heading + beta)
    theta_dot = v_bar * math.cos(beta) * math.tan(delta) / params.length

    heading = wrap_angle(state.heading + theta_dot * dt)
    speed = _clip(v + v_dot * dt, -v_max, v_max)
    return AgentState(
        position=Vec2(state.position.x + x_dot * dt,
                      state.position.y + y_dot * dt),
        heading=heading,
        speed=speed,
        velocity=Vec2(speed * math.cos(heading), speed * math.sin(heading)))


def step_invertible(state: AgentState, action: Action, dt: float,
                    v_max: float = DEFAULT_V_MAX) -> AgentState:
    """One step of the invertible bicycle: double-integrator position with
    yaw advanced by steering * displacement."""
    a = action.acceleration
    s = action.steering
    v = state.speed

    d = v * dt + 0.5 * a * dt * dt
    heading = wrap_angle(state.heading + s * d)
    speed = _clip(v + a * dt, -v_max, v_max)
    return AgentState(
        position=Vec2(state.position.x + d * math.cos(state.heading),
                      state.position.y + d * math.sin(state.heading)),
        heading=heading,
        speed=speed,
        velocity=Vec2(speed * math.cos(heading), speed * math.sin(heading)))


def invert_action(s_t: AgentState, s_t1: AgentState, dt: float) -> Action:
    """Recover the invertible-model action that maps s_t to s_t1.

    a = (v' - v) / dt; s = shortest-arc(theta' - theta) / displacement.
    Zero displacement leaves steering unidentifiable and returns s = 0.
    """
    a = (s_t1.speed - s_t.speed) / dt
    denom = s_t.speed * dt + 0.5 * a * dt * dt
    if abs(denom) < DEGENERATE_DISPLACEMENT:
        s = 0.0
    else:
        s = wrap_angle(s_t1.heading - s_t.heading) / denom
    return Action(acceleration=a, steering=s)


# ---------------------------------------------------------------------------
# Discrete action grid
# ---------------------------------------------------------------------------

class IndexOutOfRange(IndexError):
    pass


@dataclass
class ActionGrid:
    """Row-major bijection between joint indices and (accel, steer) pairs."""

    accelerations: list[float] = field(
        default_factory=lambda: list(np.linspace(*DEFAULT_ACCEL_BOUNDS, 7)))
    steerings: list[float] = field(
        default_factory=lambda: list(np.linspace(*DEFAULT_STEER_BOUNDS, 13)))

    def __post_init__(self):
        if sorted(self.accelerations) != list(self.accelerations) or \
                len(set(self.accelerations)) != len(self.accelerations):
            raise ValueError("acceleration levels must be strictly increasing")
        if sorted(self.steerings) != list(self.steerings) or \
                len(set(self.steerings)) != len(self.steerings):
            raise ValueError("steering levels must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.accelerations) * len(self.steerings)

    def discretize(self, index: int) -> Action:
        if not 0 <= index < self.size:
            raise IndexOutOfRange(f"index {index} not in [0, {self.size})")
        ai, si = divmod(index, len(self.steerings))
        return Action(acceleration=self.accelerations[ai],
                      steering=self.steerings[si])

    def action_index(self, action: Action) -> int:
        """Joint index of the grid point nearest the given action."""
        ai = min(range(len(self.accelerations)),
                 key=lambda i: abs(self.accelerations[i] - action.acceleration))
        si = min(range(len(self.steerings)),
                 key=lambda i: abs(self.steerings[i] - action.steering))
        return ai * len(self.steerings) + si


# ---------------------------------------------------------------------------
# Vectorized steppers (batched engine hot path, arrays updated in place)
# ---------------------------------------------------------------------------

def step_classic_arr(px, py, heading, speed, accel, steer, dt, length,
                     v_max=DEFAULT_V_MAX,
                     accel_bounds=DEFAULT_ACCEL_BOUNDS,
                     steer_bounds=DEFAULT_STEER_BOUNDS):
    """Classic-model step over agent arrays; returns new (px, py, heading, speed)."""
    if _fp.ENABLED:
        px, py = px.astype(float), py.astype(float)
        heading, speed = heading.astype(float), speed.astype(float)
        _fp.classic_core(px, py, heading, speed,
                         np.asarray(accel, float), np.asarray(steer, float),
                         dt, np.broadcast_to(np.asarray(length, float),
                                             px.shape).copy(),
                         v_max, accel_bounds[0], accel_bounds[1],
                         steer_bounds[0], steer_bounds[1])
        return px, py, heading, speed
    a = np.clip(accel, *accel_bounds)
    delta = np.clip(steer, *steer_bounds)
    v_bar = np.clip(speed + 0.5 * a * dt, -v_max, v_max)
    beta = np.arctan(0.5 * np.tan(delta))
    ang = heading + beta
    new_px = px + v_bar * np.cos(ang) * dt
    new_py = py + v_bar * np.sin(ang) * dt
    new_heading = wrap_angle_arr(heading + v_bar * np.cos(beta) * np.tan(delta) / length * dt)
    new_speed = np.clip(speed + a * dt, -v_max, v_max)
    return new_px, new_py, new_heading, new_speed


def step_invertible_arr(px, py, heading, speed, accel, steer, dt,
                        v_max=DEFAULT_V_MAX):
    """Invertible-model step over agent arrays."""
    if _fp.ENABLED:
        px, py = px.astype(float), py.astype(float)
        heading, speed = heading.astype(float), speed.astype(float)
        _fp.invertible_core(px, py, heading, speed,
                            np.asarray(accel, float),
                            np.asarray(steer, float), dt, v_max)
        return px, py, heading, speed
    d = speed * dt + 0.5 * accel * dt * dt
    new_px = px + d * np.cos(heading)
    new_py = py + d * np.sin(heading)
    new_heading = wrap_angle_arr(heading + steer * d)
    new_speed = np.clip(speed + accel * dt, -v_max, v_max)
    return new_px, new_py, new_heading, new_speed


def invert_actions_arr(heading_t, speed_t, heading_t1, speed_t1, dt):
    """Batched invert_action over logged state arrays; returns (accel, steer)."""
    a = (speed_t1 - speed_t) / dt
    denom = speed_t * dt + 0.5 * a * dt * dt
    dtheta = wrap_angle_arr(heading_t1 - heading_t)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = dtheta / denom
    s = np.where(np.abs(denom) < DEGENERATE_DISPLACEMENT, 0.0, s)
    return a, s
