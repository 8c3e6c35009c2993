"""Per-agent observation synthesis in the ego frame.

Three modalities:

* radial: every live agent and decimated road point within a fixed radius,
  nearest first, truncated to fixed slot caps.
* lidar: n_rays cast over 360 degrees, nearest hit distance plus a hit-type
  one-hot per ray.
* view_cone: lidar restricted to a head-controllable cone.

Observations are flat float64 vectors of constant width for a given
ObsConfig. The layout below is the contract consumed by learners:

  ego block (width 7):
      [speed, length, width, goal_x_ego, goal_y_ego, goal_dist, collided]
  radial mode appends:
      max_agents_obs partner slots, 7 wide:
          [rel_x, rel_y, rel_heading, rel_speed, length, width, valid]
      max_road_points_obs road slots, 11 wide:
          [rel_x, rel_y, rel_seg_heading, onehot(7 road kinds), valid]
  lidar / view_cone modes append n_rays ray slots, 5 wide:
      [distance, hit_agent, hit_road_edge, hit_other_road, hit_none]

Invalid slots are zero-filled with valid flag 0; misses report max_range
with hit_none set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fastpath as _fp
from .geometry import raycast_obbs_arr, raycast_segments_arr, wrap_angle_arr
from .scenario import ROAD_KINDS

EGO_WIDTH = 7
PARTNER_WIDTH = 7
ROAD_SLOT_WIDTH = 3 + len(ROAD_KINDS) + 1  # rel point, heading, one-hot, valid
RAY_WIDTH = 5
HIT_TYPES = ("agent", "road_edge", "other_road", "none")
MAX_HEAD_ANGLE = 0.5 * math.pi


class AgentNotAlive(ValueError):
    pass


@dataclass
class ObsConfig:
    mode: str = "radial"            # radial | lidar | view_cone
    radius: float = 50.0
    n_rays: int = 64
    fov: float = 2.0 * math.pi / 3.0
    max_range: float = 100.0
    max_agents_obs: int = 16
    max_road_points_obs: int = 64

    def __post_init__(self):
        if self.mode not in ("radial", "lidar", "view_cone"):
            raise ValueError(f"unknown observation mode {self.mode!r}")
        if self.n_rays < 1:
            raise ValueError("n_rays must be >= 1")
        if not 0.0 < self.fov <= 2.0 * math.pi:
            raise ValueError("fov must be in (0, 2*pi]")


@dataclass
class ObsLayout:
    """Offsets and widths of every block in the flat observation vector."""

    width: int
    blocks: list[tuple[str, int, int]]  # (name, offset, width)

    def offset(self, name: str) -> int:
        for n, off, _ in self.blocks:
            if n == name:
                return off
        raise KeyError(name)


def layout(cfg: ObsConfig) -> ObsLayout:
    blocks = [("ego", 0, EGO_WIDTH)]
    off = EGO_WIDTH
    if cfg.mode == "radial":
        blocks.append(("partners", off, PARTNER_WIDTH * cfg.max_agents_obs))
        off += PARTNER_WIDTH * cfg.max_agents_obs
        blocks.append(("roads", off, ROAD_SLOT_WIDTH * cfg.max_road_points_obs))
        off += ROAD_SLOT_WIDTH * cfg.max_road_points_obs
    else:
        blocks.append(("rays", off, RAY_WIDTH * cfg.n_rays))
        off += RAY_WIDTH * cfg.n_rays
    return ObsLayout(width=off, blocks=blocks)


def obs_width(cfg: ObsConfig) -> int:
    return layout(cfg).width


@dataclass
class EgoFeatures:
    speed: float
    length: float
    width: float
    goal_x: float
    goal_y: float
    goal_dist: float
    collided: bool


@dataclass
class Observation:
    """Parsed view over one flat observation vector."""

    vector: np.ndarray
    ego: EgoFeatures
    partners: np.ndarray | None = None   # (max_agents_obs, 7)
    roads: np.ndarray | None = None      # (max_road_points_obs, 11)
    lidar: np.ndarray | None = None      # (n_rays, 5)


# ---------------------------------------------------------------------------
# Batched writers (engine hot path). ``world`` provides numpy state arrays;
# see engine.World. ``rows`` are agent indices; out is (len(rows), width).
# ---------------------------------------------------------------------------

def _fill_ego(world, rows: np.ndarray, out: np.ndarray):
    px = world.pos[rows, 0]
    py = world.pos[rows, 1]
    heading = world.heading[rows]
    c, s = np.cos(heading), np.sin(heading)
    gx = world.goal[rows, 0] - px
    gy = world.goal[rows, 1] - py
    out[:, 0] = world.speed[rows]
    out[:, 1] = world.length[rows]
    out[:, 2] = world.width[rows]
    out[:, 3] = gx * c + gy * s
    out[:, 4] = -gx * s + gy * c
    out[:, 5] = np.hypot(gx, gy)
    out[:, 6] = world.collided_now[rows]


def fill_radial(world, cfg: ObsConfig, rows: np.ndarray, out: np.ndarray):
    if _fp.ENABLED:
        _fp.radial_fill_core(
            world.pos, world.heading, world.speed, world.length, world.width,
            world.goal, world.present & ~world.removed, world.collided_now,
            world.road_pts, world.road_pt_heading, world.road_pt_kind,
            np.asarray(rows, np.int64), cfg.radius,
            cfg.max_agents_obs, cfg.max_road_points_obs,
            EGO_WIDTH, PARTNER_WIDTH, ROAD_SLOT_WIDTH, out)
        return
    out[:] = 0.0
    _fill_ego(world, rows, out)
    n_e = len(rows)
    rowsel = np.arange(n_e)[:, None]
    ex = world.pos[rows, 0]
    ey = world.pos[rows, 1]
    eh = world.heading[rows]
    c, s = np.cos(eh)[:, None], np.sin(eh)[:, None]
    visible = world.present & ~world.removed

    # Partner slots: nearest first, id ties resolved by stable sort order.
    k = min(cfg.max_agents_obs, world.n_agents)
    if k > 0:
        dx = world.pos[None, :, 0] - ex[:, None]
        dy = world.pos[None, :, 1] - ey[:, None]
        dist = np.hypot(dx, dy)
        mask = visible[None, :] & (dist <= cfg.radius)
        mask[np.arange(n_e), rows] = False
        dist = np.where(mask, dist, np.inf)
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        valid = dist[rowsel, order] < np.inf
        sdx = dx[rowsel, order]
        sdy = dy[rowsel, order]
        block = out[:, EGO_WIDTH:EGO_WIDTH + k * PARTNER_WIDTH].reshape(
            n_e, k, PARTNER_WIDTH)
        block[:, :, 0] = (sdx * c + sdy * s) * valid
        block[:, :, 1] = (sdy * c - sdx * s) * valid
        block[:, :, 2] = wrap_angle_arr(
            world.heading[order] - eh[:, None]) * valid
        block[:, :, 3] = (world.speed[order] - world.speed[rows][:, None]) * valid
        block[:, :, 4] = world.length[order] * valid
        block[:, :, 5] = world.width[order] * valid
        block[:, :, 6] = valid

    # Road slots.
    road_off = EGO_WIDTH + PARTNER_WIDTH * cfg.max_agents_obs
    pts = world.road_pts
    k = min(cfg.max_road_points_obs, len(pts))
    if k > 0:
        dx = pts[None, :, 0] - ex[:, None]
        dy = pts[None, :, 1] - ey[:, None]
        dist = np.hypot(dx, dy)
        dist = np.where(dist <= cfg.radius, dist, np.inf)
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        valid = dist[rowsel, order] < np.inf
        sdx = dx[rowsel, order]
        sdy = dy[rowsel, order]
        block = out[:, road_off:road_off + k * ROAD_SLOT_WIDTH].reshape(
            n_e, k, ROAD_SLOT_WIDTH)
        block[:, :, 0] = (sdx * c + sdy * s) * valid
        block[:, :, 1] = (sdy * c - sdx * s) * valid
        block[:, :, 2] = wrap_angle_arr(
            world.road_pt_heading[order] - eh[:, None]) * valid
        block[:, :, 3:3 + len(ROAD_KINDS)] = (
            world.road_pt_onehot[order] * valid[:, :, None])
        block[:, :, -1] = valid


def _ray_angles(cfg: ObsConfig, center: float) -> np.ndarray:
    """Ray angles for one agent. Full-circle scans anchor at the center with
    uniform 2*pi/n spacing; narrower cones span the fov inclusively."""
    if cfg.mode == "lidar" or cfg.fov >= 2.0 * math.pi:
        return center + 2.0 * math.pi * np.arange(cfg.n_rays) / cfg.n_rays
    if cfg.n_rays == 1:
        return np.array([center])
    return center - 0.5 * cfg.fov + cfg.fov * np.arange(cfg.n_rays) / (cfg.n_rays - 1)


def fill_lidar(world, cfg: ObsConfig, rows: np.ndarray, out: np.ndarray):
    out[:] = 0.0
    _fill_ego(world, rows, out)
    visible = world.present & ~world.removed
    max_range = cfg.max_range

    seg_a, seg_b = world.seg_a, world.seg_b
    have_static = world.static_bvh is not None

    for r, i in enumerate(rows):
        ox, oy = world.pos[i]
        center = world.heading[i]
        if cfg.mode == "view_cone":
            center += world.head_angle[i]
        angles = _ray_angles(cfg, center)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])

        best = np.full(cfg.n_rays, np.inf)
        best_type = np.full(cfg.n_rays, 3, dtype=np.int8)  # none

        # Agent boxes within reach, ego excluded.
        cand = visible.copy()
        cand[i] = False
        cdx = world.pos[:, 0] - ox
        cdy = world.pos[:, 1] - oy
        cand &= np.hypot(cdx, cdy) <= max_range + world.circumradius
        idx = np.nonzero(cand)[0]
        if len(idx):
            d = raycast_obbs_arr(ox, oy, dirs, world.pos[idx, 0],
                                 world.pos[idx, 1], world.heading[idx],
                                 world.half_l[idx], world.half_w[idx])
            dmin = d.min(axis=1)
            hit = dmin < best
            best = np.where(hit, dmin, best)
            best_type = np.where(hit, 0, best_type)

        # Road segments via the static tree.
        if have_static:
            cand_idx = np.array(world.static_bvh.query_aabb(
                (ox - max_range, oy - max_range,
                 ox + max_range, oy + max_range)), dtype=np.int64)
            if len(cand_idx):
                d = raycast_segments_arr(ox, oy, dirs,
                                         seg_a[cand_idx], seg_b[cand_idx])
                j = d.argmin(axis=1)
                dmin = d[np.arange(cfg.n_rays), j]
                hit = dmin < best
                is_edge = world.seg_is_edge[cand_idx[j]]
                best = np.where(hit, dmin, best)
                best_type = np.where(hit, np.where(is_edge, 1, 2), best_type)

        miss = best > max_range
        best = np.where(miss, max_range, best)
        best_type = np.where(miss, 3, best_type)
        block = out[r, EGO_WIDTH:].reshape(cfg.n_rays, RAY_WIDTH)
        block[:, 0] = best
        block[:, 1:] = 0.0
        block[np.arange(cfg.n_rays), 1 + best_type] = 1.0


def fill_observations(world, cfg: ObsConfig, rows: np.ndarray, out: np.ndarray):
    if cfg.mode == "radial":
        fill_radial(world, cfg, rows, out)
    else:
        fill_lidar(world, cfg, rows, out)


# ---------------------------------------------------------------------------
# Single-agent API
# ---------------------------------------------------------------------------

def _single(world, agent_id: int, cfg: ObsConfig) -> np.ndarray:
    if world.removed[agent_id] or not world.present[agent_id]:
        raise AgentNotAlive(f"agent {agent_id} is not alive")
    out = np.zeros((1, obs_width(cfg)))
    fill_observations(world, cfg, np.array([agent_id]), out)
    return out[0]


def _parse(vec: np.ndarray, cfg: ObsConfig) -> Observation:
    ego = EgoFeatures(speed=vec[0], length=vec[1], width=vec[2],
                      goal_x=vec[3], goal_y=vec[4], goal_dist=vec[5],
                      collided=bool(vec[6]))
    obs = Observation(vector=vec, ego=ego)
    if cfg.mode == "radial":
        off = EGO_WIDTH
        obs.partners = vec[off:off + PARTNER_WIDTH * cfg.max_agents_obs] \
            .reshape(cfg.max_agents_obs, PARTNER_WIDTH)
        off += PARTNER_WIDTH * cfg.max_agents_obs
        obs.roads = vec[off:off + ROAD_SLOT_WIDTH * cfg.max_road_points_obs] \
            .reshape(cfg.max_road_points_obs, ROAD_SLOT_WIDTH)
    else:
        obs.lidar = vec[EGO_WIDTH:].reshape(cfg.n_rays, RAY_WIDTH)
    return obs


def radial_obs(world, agent_id: int, cfg: ObsConfig) -> Observation:
    assert cfg.mode == "radial"
    return _parse(_single(world, agent_id, cfg), cfg)


def lidar_obs(world, agent_id: int, cfg: ObsConfig) -> Observation:
    assert cfg.mode == "lidar"
    return _parse(_single(world, agent_id, cfg), cfg)


def view_cone_obs(world, agent_id: int, cfg: ObsConfig,
                  head_angle: float | None = None) -> Observation:
    """Cone scan centered on heading + head angle. When ``head_angle`` is
    given it overrides the agent's integrated head state."""
    assert cfg.mode == "view_cone"
    if head_angle is not None:
        saved = world.head_angle[agent_id]
        world.head_angle[agent_id] = np.clip(head_angle, -MAX_HEAD_ANGLE,
                                             MAX_HEAD_ANGLE)
        try:
            return _parse(_single(world, agent_id, cfg), cfg)
        finally:
            world.head_angle[agent_id] = saved
    return _parse(_single(world, agent_id, cfg), cfg)
