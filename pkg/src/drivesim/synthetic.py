"""Synthetic scenario generation for tests and benchmarks.

Three map templates:

* straight_road: parallel lanes heading +x between two road edges; every
  agent cruises 40 m to its goal.
* intersection: two perpendicular corridors withL-shaped corner edges;
  one mover per arm staggered in start distance so paths clear the junction
  at distinct times, plus parked cars on the shoulders.
* parking_lot: a walled rectangle of parked cars with one mover driving
  the central aisle.

Logged trajectories are produced by rolling the classic bicycle stepper, so
they are dynamically feasible by construction, and goals equal final logged
positions, so they are always reachable. Output is deterministic per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import step_classic_arr
from .geometry import Vec2, wrap_angle
from .scenario import (DEFAULT_NUM_STEPS, DEFAULT_TIMESTEP, LoggedStep,
                       ObjectLog, RoadElement, Scenario)

TEMPLATES = ("straight_road", "intersection", "parking_lot")

VEHICLE_LENGTH = 4.6
VEHICLE_WIDTH = 1.8


class InvalidSpec(ValueError):
    pass


@dataclass
class SyntheticSpec:
    template: str
    n_agents: int = 1
    seed: int = 0
    num_steps: int = DEFAULT_NUM_STEPS
    timestep: float = DEFAULT_TIMESTEP
    points_per_edge: int = 25  # collinear points per straight edge segment

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise InvalidSpec(f"unknown template {self.template!r}")
        if self.n_agents < 1:
            raise InvalidSpec("n_agents must be >= 1")


def _polyline(points: list[tuple], n_points: int) -> list[Vec2]:
    """Resample a piecewise-linear path to ~n_points, keeping the corners."""
    pts = [np.asarray(p, dtype=float) for p in points]
    lengths = [np.linalg.norm(b - a) for a, b in zip(pts[:-1], pts[1:])]
    total = sum(lengths)
    out = [Vec2(*pts[0])]
    for a, b, seg_len in zip(pts[:-1], pts[1:], lengths):
        n_seg = max(1, round((n_points - 1) * seg_len / total))
        for k in range(1, n_seg + 1):
            p = a + (b - a) * (k / n_seg)
            out.append(Vec2(float(p[0]), float(p[1])))
    return out


def _rollout(start: tuple, heading: float, speed: float, length: float,
             num_steps: int, dt: float) -> list[LoggedStep]:
    """Constant-action rollout of the classic bicycle model (a=0, steer=0)."""
    px = np.array([start[0]])
    py = np.array([start[1]])
    h = np.array([heading])
    v = np.array([speed])
    zero = np.zeros(1)
    steps = []
    for _ in range(num_steps):
        steps.append(LoggedStep(
            position=Vec2(float(px[0]), float(py[0])),
            heading=wrap_angle(float(h[0])),
            velocity=Vec2(float(v[0] * math.cos(h[0])),
                          float(v[0] * math.sin(h[0]))),
            valid=True))
        px, py, h, v = step_classic_arr(px, py, h, v, zero, zero, dt,
                                        np.array([length]))
    return steps[:num_steps]


def _vehicle(oid: int, steps: list[LoggedStep], length: float,
             width: float) -> ObjectLog:
    return ObjectLog(id=oid, kind="vehicle", length=length, width=width,
                     goal=steps[-1].position, states=steps)


def _straight_road(spec: SyntheticSpec, rng: np.random.Generator) -> Scenario:
    n_lanes, n_slots = 4, 6
    capacity = n_lanes * n_slots
    if spec.n_agents > capacity:
        raise InvalidSpec(f"straight_road holds at most {capacity} agents")
    lane_y = [4.0 * k for k in range(n_lanes)]
    roads = [
        RoadElement(id=1000, kind="road_edge",
                    geometry=_polyline([(-80, -3.0), (60, -3.0)],
                                       spec.points_per_edge)),
        RoadElement(id=1001, kind="road_edge",
                    geometry=_polyline([(-80, lane_y[-1] + 3.0),
                                        (60, lane_y[-1] + 3.0)],
                                       spec.points_per_edge)),
    ]
    travel = 40.0
    speed = travel / (spec.timestep * (spec.num_steps - 1))
    objects = []
    for i in range(spec.n_agents):
        lane, slot = i % n_lanes, i // n_lanes
        length = VEHICLE_LENGTH + rng.uniform(-0.2, 0.2)
        start = (-12.0 * slot, lane_y[lane])
        steps = _rollout(start, 0.0, speed, length, spec.num_steps,
                         spec.timestep)
        objects.append(_vehicle(i, steps, length, VEHICLE_WIDTH))
    return Scenario(name=f"straight_road-{spec.seed}", timestep=spec.timestep,
                    num_steps=spec.num_steps, objects=objects, roads=roads)


def _parked(oid: int, pos: tuple, heading: float, num_steps: int,
            length: float) -> ObjectLog:
    steps = [LoggedStep(position=Vec2(*pos), heading=heading,
                        velocity=Vec2(0.0, 0.0), valid=True)
             for _ in range(num_steps)]
    return _vehicle(oid, steps, length, VEHICLE_WIDTH)


def _intersection(spec: SyntheticSpec, rng: np.random.Generator) -> Scenario:
    n_arms = 4
    n_parked_per_arm = 2
    capacity = n_arms * (1 + n_parked_per_arm)
    if spec.n_agents > capacity:
        raise InvalidSpec(f"intersection holds at most {capacity} agents")

    half = 6.0       # corridor half-width
    reach = 130.0    # edge extent from the center
    pts = spec.points_per_edge
    roads = []
    # Four L-shaped corner edges leave the crossing open.
    corners = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    for ci, (sx, sy) in enumerate(corners):
        roads.append(RoadElement(
            id=1000 + ci, kind="road_edge",
            geometry=_polyline([(sx * half, sy * reach),
                                (sx * half, sy * half),
                                (sx * reach, sy * half)], 2 * pts)))

    # Arm k: heading, unit direction, lane offset (right-hand side).
    arms = [(0.0, (1, 0), (0, -2.0)), (math.pi / 2, (0, 1), (2.0, 0)),
            (math.pi, (-1, 0), (0, 2.0)), (-math.pi / 2, (0, -1), (-2.0, 0))]
    objects = []
    dt, T = spec.timestep, spec.num_steps
    for i in range(min(spec.n_agents, n_arms)):
        heading, (ux, uy), (ox, oy) = arms[i]
        start_dist = 20.0 + 24.0 * i
        goal_dist = 24.0
        travel = start_dist + goal_dist
        speed = travel / (dt * (T - 1))
        length = VEHICLE_LENGTH + rng.uniform(-0.2, 0.2)
        start = (-ux * start_dist + ox, -uy * start_dist + oy)
        steps = _rollout(start, heading, speed, length, T, dt)
        objects.append(_vehicle(i, steps, length, VEHICLE_WIDTH))
    for i in range(n_arms, spec.n_agents):
        k = (i - n_arms) % n_arms
        slot = (i - n_arms) // n_arms
        heading, (ux, uy), _ = arms[k]
        shoulder = 4.5
        along = 30.0 + 14.0 * slot + rng.uniform(-0.3, 0.3)
        pos = (-ux * along - uy * shoulder, -uy * along + ux * shoulder)
        objects.append(_parked(i, pos, heading, T,
                               VEHICLE_LENGTH + rng.uniform(-0.2, 0.2)))
    return Scenario(name=f"intersection-{spec.seed}", timestep=dt,
                    num_steps=T, objects=objects, roads=roads)


def _parking_lot(spec: SyntheticSpec, rng: np.random.Generator) -> Scenario:
    rows, cols = 4, 6
    capacity = 1 + rows * cols
    if spec.n_agents > capacity:
        raise InvalidSpec(f"parking_lot holds at most {capacity} agents")
    width, height = 70.0, 46.0
    pts = spec.points_per_edge
    boundary = _polyline([(0, 0), (width, 0), (width, height), (0, height),
                          (0, 0)], 4 * pts)
    roads = [RoadElement(id=1000, kind="road_edge", geometry=boundary)]

    objects = []
    dt, T = spec.timestep, spec.num_steps
    # Agent 0 drives the central aisle left to right.
    aisle_y = height / 2
    travel = width - 20.0
    speed = travel / (dt * (T - 1))
    length = VEHICLE_LENGTH + rng.uniform(-0.2, 0.2)
    steps = _rollout((10.0, aisle_y), 0.0, speed, length, T, dt)
    objects.append(_vehicle(0, steps, length, VEHICLE_WIDTH))
    # Parked grid above and below the aisle.
    for i in range(1, spec.n_agents):
        k = i - 1
        row, col = k % rows, k // rows
        y = aisle_y + (8.0 + 7.0 * (row % 2)) * (1 if row < 2 else -1)
        x = 8.0 + 9.5 * col + rng.uniform(-0.3, 0.3)
        objects.append(_parked(i, (x, y), math.pi / 2, T,
                               VEHICLE_LENGTH + rng.uniform(-0.2, 0.2)))
    return Scenario(name=f"parking_lot-{spec.seed}", timestep=dt,
                    num_steps=T, objects=objects, roads=roads)


def generate_synthetic(spec: SyntheticSpec) -> Scenario:
    """Deterministic synthetic scenario for the given spec."""
    rng = np.random.default_rng(spec.seed)
    if spec.template == "straight_road":
        return _straight_road(spec, rng)
    if spec.template == "intersection":
        return _intersection(spec, rng)
    return _parking_lot(spec, rng)
