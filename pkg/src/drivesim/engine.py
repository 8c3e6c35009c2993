"""Batched multi-world simulation: reset/step loop, expert replay, rewards,
terminations, metrics, and the throughput benchmark.

Worlds are share-nothing and stepped sequentially inside; a batch distributes
whole worlds across a fork-based worker pool, so results are bit-identical
for any worker count. Memory is allocated per actual instantiated agents,
never per a padded maximum.
"""

from __future__ import annotations

import math
import multiprocessing
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _fastpath as _fp
from . import broadphase
from . import dynamics as dyn
from .geometry import obb_corners_arr, obb_overlap_pairs, obb_segments_intersect_arr
from .observation import MAX_HEAD_ANGLE, ObsConfig, fill_observations, obs_width
from .scenario import OBJECT_KINDS, ROAD_KINDS, PreparedScenario

AABB_MARGIN = 0.01  # meters of slack around agent boxes in the broad phase
PEDESTRIAN = OBJECT_KINDS.index("pedestrian")
ROAD_EDGE = ROAD_KINDS.index("road_edge")

DYNAMICS_MODELS = ("classic", "invertible")
COLLISION_BEHAVIORS = ("ignore", "remove_agent", "end_episode")
INIT_MODES = ("all_nontrivial", "all_valid")


class ActionCountMismatch(ValueError):
    pass


class NoControllableAgents(UserWarning):
    pass


@dataclass
class SimConfig:
    dynamics: str = "classic"
    obs: ObsConfig = field(default_factory=ObsConfig)
    goal_tolerance: float = 2.0
    collision_behavior: str = "ignore"
    init_mode: str = "all_nontrivial"
    nontrivial_threshold: float = 2.0
    max_controlled_per_world: int | None = None
    seed: int = 0
    accel_bounds: tuple = dyn.DEFAULT_ACCEL_BOUNDS
    steer_bounds: tuple = dyn.DEFAULT_STEER_BOUNDS
    v_max: float = dyn.DEFAULT_V_MAX

    def __post_init__(self):
        if self.dynamics not in DYNAMICS_MODELS:
            raise ValueError(f"unknown dynamics model {self.dynamics!r}")
        if self.collision_behavior not in COLLISION_BEHAVIORS:
            raise ValueError(f"unknown collision behavior {self.collision_behavior!r}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"unknown init mode {self.init_mode!r}")
        if self.goal_tolerance <= 0:
            raise ValueError("goal_tolerance must be > 0")

    @classmethod
    def from_file(cls, path: str) -> "SimConfig":
        """Flat key=value config; keys mirror SimConfig/ObsConfig fields."""
        kv = {}
        with open(path) as f:
            for line in f:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
        obs_keys = {f: kv.pop(f) for f in
                    ("mode", "radius", "n_rays", "fov", "max_range",
                     "max_agents_obs", "max_road_points_obs") if f in kv}
        cfg = cls()
        obs = ObsConfig(**{k: (v if k == "mode" else
                               int(v) if k in ("n_rays", "max_agents_obs",
                                               "max_road_points_obs")
                               else float(v))
                           for k, v in obs_keys.items()})
        for key, value in kv.items():
            if not hasattr(cfg, key):
                raise KeyError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if key in ("dynamics", "collision_behavior", "init_mode"):
                setattr(cfg, key, value)
            elif key == "max_controlled_per_world":
                setattr(cfg, key, None if value in ("none", "") else int(value))
            elif isinstance(current, tuple):
                setattr(cfg, key, tuple(float(v) for v in value.split(",")))
            elif isinstance(current, int) and not isinstance(current, bool):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        cfg.obs = obs
        cfg.__post_init__()
        return cfg


@dataclass
class EpisodeInfo:
    scenario: str
    world_id: int
    n_controlled: int
    n_goal: int
    n_veh_collision: int
    n_offroad: int


@dataclass
class Metrics:
    goal_rate: float
    veh_collision_rate: float
    offroad_rate: float
    episodes: int


@dataclass
class StepOutput:
    observations: np.ndarray  # (n_controlled_total, obs_width)
    rewards: np.ndarray       # (n_controlled_total,)
    dones: np.ndarray         # (n_controlled_total,) bool
    info: dict                # goal / veh_collision / offroad bool arrays


@dataclass
class ThroughputReport:
    worlds: int
    steps: int
    elapsed_s: float
    total_agents: int
    controlled_agents: int
    asps: float = 0.0
    casps: float = 0.0

    def __post_init__(self):
        self.asps = self.steps * self.total_agents / self.elapsed_s
        self.casps = self.steps * self.controlled_agents / self.elapsed_s


def compute_metrics(episode_infos: list[EpisodeInfo]) -> Metrics:
    """Rates over controlled agents; each agent counts once per episode per
    category. Episodes with zero controlled agents contribute nothing."""
    if not episode_infos:
        raise ValueError("no completed episodes")
    total = sum(e.n_controlled for e in episode_infos)
    if total == 0:
        return Metrics(0.0, 0.0, 0.0, len(episode_infos))
    return Metrics(
        goal_rate=sum(e.n_goal for e in episode_infos) / total,
        veh_collision_rate=sum(e.n_veh_collision for e in episode_infos) / total,
        offroad_rate=sum(e.n_offroad for e in episode_infos) / total,
        episodes=len(episode_infos))


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

class World:
    """One independent simulation instance of one prepared scenario."""

    def __init__(self, prepared: PreparedScenario, cfg: SimConfig,
                 world_id: int = 0):
        self.cfg = cfg
        self.world_id = world_id
        base = prepared.base
        self.name = base.name
        self.dt = base.timestep
        self.num_steps = base.num_steps

        objs = base.objects
        n = self.n_agents = len(objs)
        T = base.num_steps
        self.kind = np.array([OBJECT_KINDS.index(o.kind) for o in objs],
                             dtype=np.int8)
        self.length = np.array([o.length for o in objs])
        self.width = np.array([o.width for o in objs])
        self.half_l = 0.5 * self.length
        self.half_w = 0.5 * self.width
        self.circumradius = np.hypot(self.half_l, self.half_w)
        self.goal = np.array([[o.goal.x, o.goal.y] for o in objs]) \
            if n else np.zeros((0, 2))
        self.force_replay = np.array([o.force_replay for o in objs], dtype=bool)

        self.log_valid = np.zeros((n, T), dtype=bool)
        self.log_pos = np.zeros((n, T, 2))
        self.log_heading = np.zeros((n, T))
        self.log_speed = np.zeros((n, T))
        for i, o in enumerate(objs):
            for t, st in enumerate(o.states[:T]):
                self.log_valid[i, t] = st.valid
                self.log_pos[i, t] = (st.position.x, st.position.y)
                self.log_heading[i, t] = st.heading
                self.log_speed[i, t] = math.hypot(st.velocity.x, st.velocity.y)

        self.instantiable = self.log_valid.any(axis=1)
        first_valid = np.where(self.instantiable,
                               self.log_valid.argmax(axis=1), T)
        self.first_valid = first_valid

        # Forward-filled replay pose (held last valid; seeded with the first
        # valid state before entry) and per-step presence.
        self.replay_pos = np.array(self.log_pos)
        self.replay_heading = np.array(self.log_heading)
        self.replay_speed = np.array(self.log_speed)
        for i in range(n):
            if not self.instantiable[i]:
                continue
            fv = first_valid[i]
            self.replay_pos[i, :fv] = self.log_pos[i, fv]
            self.replay_heading[i, :fv] = self.log_heading[i, fv]
            self.replay_speed[i, :fv] = self.log_speed[i, fv]
            for t in range(fv + 1, T):
                if not self.log_valid[i, t]:
                    self.replay_pos[i, t] = self.replay_pos[i, t - 1]
                    self.replay_heading[i, t] = self.replay_heading[i, t - 1]
                    self.replay_speed[i, t] = self.replay_speed[i, t - 1]
        steps_idx = np.arange(T)[None, :]
        self.present_log = self.instantiable[:, None] & (
            steps_idx >= first_valid[:, None])

        valid0 = self.log_valid[:, 0] if T else np.zeros(n, dtype=bool)
        if cfg.init_mode == "all_valid":
            base_mask = valid0 & ~self.force_replay
        else:
            base_mask = np.array(prepared.controllable, dtype=bool) & valid0
        ids = np.nonzero(base_mask)[0]
        if cfg.max_controlled_per_world is not None:
            ids = ids[:cfg.max_controlled_per_world]
        self.controlled_ids = ids
        self.controlled = np.zeros(n, dtype=bool)
        self.controlled[ids] = True
        self.n_controlled = len(ids)
        if self.n_controlled == 0:
            warnings.warn(f"world {world_id} ({base.name}): no controllable "
                          "agents, replay-only", NoControllableAgents)
        self.replay_only_mask = self.instantiable & ~self.controlled
        self.n_instantiated = int(self.instantiable.sum())

        # Static road geometry.
        seg_a, seg_b, seg_kind = [], [], []
        pts, pt_heading, pt_kind = [], [], []
        for road in prepared.decimated_roads:
            g = road.geometry
            ki = ROAD_KINDS.index(road.kind)
            for j, p in enumerate(g):
                pts.append((p.x, p.y))
                if len(g) == 1:
                    pt_heading.append(0.0)
                else:
                    q = g[j + 1] if j + 1 < len(g) else g[j]
                    r = g[j] if j + 1 < len(g) else g[j - 1]
                    pt_heading.append(math.atan2(q.y - r.y, q.x - r.x))
                pt_kind.append(ki)
            for j in range(len(g) - 1):
                seg_a.append((g[j].x, g[j].y))
                seg_b.append((g[j + 1].x, g[j + 1].y))
                seg_kind.append(ki)
        self.seg_a = np.array(seg_a) if seg_a else np.zeros((0, 2))
        self.seg_b = np.array(seg_b) if seg_b else np.zeros((0, 2))
        self.seg_kind = np.array(seg_kind, dtype=np.int8)
        self.seg_is_edge = self.seg_kind == ROAD_EDGE
        self.road_pts = np.array(pts) if pts else np.zeros((0, 2))
        self.road_pt_heading = np.array(pt_heading)
        self.road_pt_kind = np.array(pt_kind, dtype=np.int8)
        self.road_pt_onehot = np.zeros((len(pts), len(ROAD_KINDS)))
        if pts:
            self.road_pt_onehot[np.arange(len(pts)), pt_kind] = 1.0

        if len(self.seg_a):
            aabbs = np.empty((len(self.seg_a), 4))
            aabbs[:, 0:2] = np.minimum(self.seg_a, self.seg_b)
            aabbs[:, 2:4] = np.maximum(self.seg_a, self.seg_b)
            self.static_bvh = broadphase.build(
                list(zip(range(len(aabbs)), aabbs)))
            self.edge_bvh_ids = np.nonzero(self.seg_is_edge)[0]
        else:
            self.static_bvh = None

        # Mutable per-step state.
        self.pos = np.zeros((n, 2))
        self.heading = np.zeros(n)
        self.speed = np.zeros(n)
        self.head_angle = np.zeros(n)
        self.present = np.zeros(n, dtype=bool)
        self.removed = np.zeros(n, dtype=bool)
        self.pending_removal = np.zeros(n, dtype=bool)
        self.goal_reached = np.zeros(n, dtype=bool)
        self.collided_now = np.zeros(n, dtype=bool)
        self.offroad_now = np.zeros(n, dtype=bool)
        self.goal_ever = np.zeros(n, dtype=bool)
        self.veh_collision_ever = np.zeros(n, dtype=bool)
        self.offroad_ever = np.zeros(n, dtype=bool)
        self.done = np.zeros(n, dtype=bool)
        self.dynamic_bvh = None
        self.t = 0
        self.episode_over = False
        self._has_edges = bool(self.seg_is_edge.any())
        self._rewards = np.zeros(self.n_controlled)
        self._info = {k: np.zeros(self.n_controlled, dtype=bool)
                      for k in ("goal", "veh_collision", "offroad")}
        self._aabb_buf = np.empty((n, 4))
        self.reset()

    # -- lifecycle ---------------------------------------------------------

    def reset(self):
        self.t = 0
        self.episode_over = False
        self.pos[:] = self.replay_pos[:, 0]
        self.heading[:] = self.replay_heading[:, 0]
        self.speed[:] = self.replay_speed[:, 0]
        self.head_angle[:] = 0.0
        self.present[:] = self.present_log[:, 0] | self.controlled
        self.removed[:] = False
        self.pending_removal[:] = False
        self.goal_reached[:] = False
        self.collided_now[:] = False
        self.offroad_now[:] = False
        self.goal_ever[:] = False
        self.veh_collision_ever[:] = False
        self.offroad_ever[:] = False
        self.done[:] = False
        aabbs = self._agent_aabbs()
        if self.dynamic_bvh is None and self.n_agents:
            self.dynamic_bvh = broadphase.build(
                list(zip(range(self.n_agents), aabbs)))
        elif self.dynamic_bvh is not None:
            self.dynamic_bvh.refit(aabbs)

    def _agent_aabbs(self, trig=None) -> np.ndarray:
        boxed = self.present & ~self.removed
        if _fp.ENABLED:
            _fp.agent_aabbs_core(self.pos, self.heading, self.half_l,
                                 self.half_w, boxed, AABB_MARGIN,
                                 self._aabb_buf)
            return self._aabb_buf
        corners = obb_corners_arr(self.pos[:, 0], self.pos[:, 1], self.heading,
                                  np.where(boxed, self.half_l, 0.0),
                                  np.where(boxed, self.half_w, 0.0),
                                  trig=trig)
        return broadphase.aabb_of_corners(corners, AABB_MARGIN)

    # -- stepping ----------------------------------------------------------

    def step(self, actions: np.ndarray | None,
             obs_out: np.ndarray | None = None):
        """Advance one step. ``actions`` has one row (accel, steer[, head])
        per controlled agent in controlled_ids order, or None for expert
        replay of everyone. Returns (rewards, dones, info) per controlled
        agent; observations are written into ``obs_out`` when given."""
        cfg = self.cfg
        ids = self.controlled_ids
        rewards = self._rewards
        rewards[:] = 0.0
        info = self._info
        for v in info.values():
            v[:] = False
        if self.episode_over:
            if obs_out is not None:
                obs_out[:] = 0.0
            return rewards, self.done[ids].copy(), info
        if actions is not None and len(actions) != self.n_controlled:
            raise ActionCountMismatch(
                f"expected {self.n_controlled} actions, got {len(actions)}")

        # (1) remove agents flagged last step, then advance everyone.
        self.removed |= self.pending_removal
        self.pending_removal[:] = False
        t_next = min(self.t + 1, self.num_steps - 1)

        replay = self.replay_only_mask.copy()
        if actions is None:
            replay |= self.controlled
        live_ctrl_rows = None
        if actions is not None and self.n_controlled:
            live = ~self.removed[ids] & ~self.done[ids]
            rows = ids[live]
            live_ctrl_rows = rows
            if len(rows):
                act = np.asarray(actions, dtype=float)[live]
                if cfg.dynamics == "classic":
                    px, py, h, v = dyn.step_classic_arr(
                        self.pos[rows, 0], self.pos[rows, 1],
                        self.heading[rows], self.speed[rows],
                        act[:, 0], act[:, 1], self.dt, self.length[rows],
                        cfg.v_max, cfg.accel_bounds, cfg.steer_bounds)
                else:
                    px, py, h, v = dyn.step_invertible_arr(
                        self.pos[rows, 0], self.pos[rows, 1],
                        self.heading[rows], self.speed[rows],
                        act[:, 0], act[:, 1], self.dt, cfg.v_max)
                self.pos[rows, 0] = px
                self.pos[rows, 1] = py
                self.heading[rows] = h
                self.speed[rows] = v
                if act.shape[1] > 2:
                    self.head_angle[rows] = np.clip(
                        self.head_angle[rows] + act[:, 2] * self.dt,
                        -MAX_HEAD_ANGLE, MAX_HEAD_ANGLE)

        rep = replay & self.instantiable & ~self.removed
        if rep.any():
            self.pos[rep] = self.replay_pos[rep, t_next]
            self.heading[rep] = self.replay_heading[rep, t_next]
            self.speed[rep] = self.replay_speed[rep, t_next]
            self.present[rep] = self.present_log[rep, t_next]

        # (2-3) refresh broad phase and resolve collisions.
        self.collided_now[:] = False
        self.offroad_now[:] = False
        if self.n_agents:
            trig = (np.cos(self.heading), np.sin(self.heading))
            aabbs = self._agent_aabbs(trig)
            self.dynamic_bvh.refit(aabbs)
            eligible = self.present & ~self.removed & (
                (self.controlled & ~self.done) | self.log_valid[:, t_next])
            ii, jj = self.dynamic_bvh.query_pairs_idx()
            if len(ii):
                keep = eligible[ii] & eligible[jj]
                ii, jj = ii[keep], jj[keep]
                if len(ii):
                    hits = obb_overlap_pairs(self.pos[:, 0], self.pos[:, 1],
                                             self.heading, self.half_l,
                                             self.half_w, ii, jj, trig=trig)
                    self.collided_now[ii[hits]] = True
                    self.collided_now[jj[hits]] = True

            if self.static_bvh is not None and self._has_edges:
                offroad_check = eligible & (self.kind != PEDESTRIAN)
                rows = np.nonzero(offroad_check)[0]
                if len(rows):
                    cands = self.static_bvh.query_aabbs_arr(aabbs[rows])
                    lens = [len(c) for c in cands]
                    if any(lens):
                        ai = np.repeat(rows, lens)
                        si = np.concatenate(cands)
                        edge = self.seg_is_edge[si]
                        ai, si = ai[edge], si[edge]
                    else:
                        ai = si = ()
                    if len(ai):
                        hits = obb_segments_intersect_arr(
                            self.pos[ai, 0], self.pos[ai, 1],
                            self.heading[ai], self.half_l[ai],
                            self.half_w[ai], self.seg_a[si], self.seg_b[si],
                            trig=(trig[0][ai], trig[1][ai]))
                        self.offroad_now[ai[hits]] = True

        # (4) goal rewards, then terminations.
        if self.n_controlled:
            live = self.controlled & ~self.removed & ~self.done
            dgx = self.pos[:, 0] - self.goal[:, 0]
            dgy = self.pos[:, 1] - self.goal[:, 1]
            at_goal = live & (np.hypot(dgx, dgy) <= cfg.goal_tolerance)
            self.goal_reached |= at_goal
            self.goal_ever |= at_goal
            self.pending_removal |= at_goal
            self.done |= at_goal
            rewards[at_goal[ids]] = 1.0

            coll = self.collided_now | self.offroad_now
            self.veh_collision_ever |= self.collided_now & live
            self.offroad_ever |= self.offroad_now & live
            if cfg.collision_behavior == "remove_agent":
                ended = live & coll
                self.pending_removal |= ended
                self.done |= ended
            elif cfg.collision_behavior == "end_episode":
                if (live & coll).any():
                    self.episode_over = True

            info["goal"] = at_goal[ids]
            info["veh_collision"] = (self.collided_now & live)[ids]
            info["offroad"] = (self.offroad_now & live)[ids]

        self.t += 1
        if self.t >= self.num_steps:
            self.episode_over = True
        if self.episode_over:
            self.done[ids] = True

        # (5) observations for live controlled agents; done rows zero-filled.
        if obs_out is not None and self.n_controlled:
            self._fill_obs(obs_out)

        return rewards, self.done[ids].copy(), info

    def _fill_obs(self, obs_out: np.ndarray):
        ids = self.controlled_ids
        alive = ~self.done[ids] & ~self.removed[ids]
        if alive.all():
            fill_observations(self, self.cfg.obs, ids, obs_out)
        else:
            obs_out[:] = 0.0
            if alive.any():
                # Boolean indexing copies; write back explicitly.
                rows = ids[alive]
                block = np.zeros((len(rows), obs_out.shape[1]))
                fill_observations(self, self.cfg.obs, rows, block)
                obs_out[alive] = block

    def observe(self, obs_out: np.ndarray):
        """Observations for the current state (used right after reset)."""
        if self.n_controlled:
            self._fill_obs(obs_out)
        else:
            obs_out[:] = 0.0

    def episode_info(self) -> EpisodeInfo:
        ids = self.controlled_ids
        return EpisodeInfo(
            scenario=self.name, world_id=self.world_id,
            n_controlled=self.n_controlled,
            n_goal=int(self.goal_ever[ids].sum()),
            n_veh_collision=int(self.veh_collision_ever[ids].sum()),
            n_offroad=int(self.offroad_ever[ids].sum()))


# ---------------------------------------------------------------------------
# Policies (trivial controllers for benchmarking and sanity rollouts)
# ---------------------------------------------------------------------------

def make_policy(spec: str, cfg: SimConfig, world: World, seed: int = 0):
    """Returns callable(t) -> action array (or None for replay).

    Specs: "random", "replay", "constant[:a:s]", "goal_seek".
    """
    n = world.n_controlled
    if spec == "replay":
        return lambda t: None
    if spec == "random":
        rng = np.random.default_rng([seed, world.world_id])
        lo = np.array([cfg.accel_bounds[0], cfg.steer_bounds[0]])
        hi = np.array([cfg.accel_bounds[1], cfg.steer_bounds[1]])
        return lambda t: rng.uniform(lo, hi, size=(n, 2))
    if spec.startswith("constant"):
        parts = spec.split(":")
        a = float(parts[1]) if len(parts) > 1 else 0.0
        s = float(parts[2]) if len(parts) > 2 else 0.0
        const = np.tile([a, s], (n, 1))
        return lambda t: const
    if spec == "goal_seek":
        return lambda t: goal_seek_actions(world)
    raise ValueError(f"unknown policy {spec!r}")


def goal_seek_actions(world: World) -> np.ndarray:
    """Proportional steer-to-goal controller with speed capped by distance.

    Simple enough to predict, strong enough to reach goals on open maps;
    used as an end-to-end sanity oracle for the engine.
    """
    cfg = world.cfg
    ids = world.controlled_ids
    dx = world.goal[ids, 0] - world.pos[ids, 0]
    dy = world.goal[ids, 1] - world.pos[ids, 1]
    dist = np.hypot(dx, dy)
    err = np.arctan2(dy, dx) - world.heading[ids]
    err = np.mod(err + math.pi, 2 * math.pi) - math.pi
    steer = np.clip(2.0 * err, *cfg.steer_bounds)
    target_v = np.minimum(0.8 * dist + 0.5, 15.0)
    accel = np.clip(2.0 * (target_v - world.speed[ids]), *cfg.accel_bounds)
    return np.column_stack([accel, steer])


# ---------------------------------------------------------------------------
# SimBatch
# ---------------------------------------------------------------------------

class SimBatch:
    """W independent worlds stepped in lockstep.

    Observation/reward/done buffers are flat over the actual controlled
    agents of every world. With ``n_workers`` > 1 the worlds are distributed
    round-robin over forked workers; outputs are gathered into the same
    buffers, so results do not depend on the worker count.
    """

    def __init__(self, scenarios: list[PreparedScenario], cfg: SimConfig,
                 n_workers: int = 1):
        if not scenarios:
            raise ValueError("need at least one scenario")
        self.cfg = cfg
        self.worlds = [World(prep, cfg, world_id=w)
                       for w, prep in enumerate(scenarios)]
        self.n_worlds = len(self.worlds)
        counts = [w.n_controlled for w in self.worlds]
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        self.n_controlled = int(self.offsets[-1])
        self.total_agents = sum(w.n_instantiated for w in self.worlds)
        self.width = obs_width(cfg.obs)
        self.observations = np.zeros((self.n_controlled, self.width))
        self.rewards = np.zeros(self.n_controlled)
        self.dones = np.zeros(self.n_controlled, dtype=bool)
        self.info = {k: np.zeros(self.n_controlled, dtype=bool)
                     for k in ("goal", "veh_collision", "offroad")}
        self.agent_index = [(w.world_id, int(a)) for w in self.worlds
                            for a in w.controlled_ids]
        # Authoritative per-world episode flag; in pool mode the local World
        # objects are stale snapshots (live state sits in the workers).
        self.episode_over = np.zeros(self.n_worlds, dtype=bool)
        self.episode_infos: list[EpisodeInfo] = []
        # Compile kernels and fill initial buffers before forking workers so
        # children inherit warm code and identical state.
        _fp.warmup()
        self._pool = None
        self.reset()
        if n_workers > 1:
            self._pool = _WorkerPool(self, n_workers)

    def _slice(self, w: int) -> slice:
        return slice(self.offsets[w], self.offsets[w + 1])

    def step(self, actions: np.ndarray | None) -> StepOutput:
        """Step every world; one action row per controlled agent (flat over
        worlds), or None to replay logs everywhere."""
        if actions is not None and len(actions) != self.n_controlled:
            raise ActionCountMismatch(
                f"expected {self.n_controlled} action rows, got {len(actions)}")
        if self._pool is not None:
            self._pool.step(actions)
        else:
            for w, world in enumerate(self.worlds):
                sl = self._slice(w)
                was_over = world.episode_over
                rew, done, info = world.step(
                    None if actions is None else actions[sl],
                    obs_out=self.observations[sl])
                self.rewards[sl] = rew
                self.dones[sl] = done
                for k in self.info:
                    self.info[k][sl] = info[k]
                self.episode_over[w] = world.episode_over
                if world.episode_over and not was_over:
                    self.episode_infos.append(world.episode_info())
        return StepOutput(self.observations, self.rewards, self.dones,
                          self.info)

    def reset(self, world_ids=None) -> np.ndarray:
        if world_ids is None:
            world_ids = range(self.n_worlds)
        if self._pool is not None:
            self._pool.reset(list(world_ids))
        else:
            for w in world_ids:
                self.worlds[w].reset()
                self.worlds[w].observe(self.observations[self._slice(w)])
                self.rewards[self._slice(w)] = 0.0
                self.dones[self._slice(w)] = False
                self.episode_over[w] = False
        return self.observations

    def compute_metrics(self) -> Metrics:
        return compute_metrics(self.episode_infos)

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


class _WorkerPool:
    """Fork-based pool; worker k owns worlds k, k+n, k+2n, ... Workers
    inherit fully constructed worlds through fork, so spawning is cheap and
    per-world state never crosses process boundaries."""

    def __init__(self, batch: SimBatch, n_workers: int):
        ctx = multiprocessing.get_context("fork")
        self.batch = batch
        self.n_workers = min(n_workers, batch.n_worlds)
        self.pipes = []
        self.procs = []
        self.assignment = [list(range(k, batch.n_worlds, self.n_workers))
                           for k in range(self.n_workers)]
        for k in range(self.n_workers):
            parent, child = ctx.Pipe()
            proc = ctx.Process(target=_pool_worker,
                               args=(child, batch, self.assignment[k]),
                               daemon=True)
            proc.start()
            child.close()
            self.pipes.append(parent)
            self.procs.append(proc)

    def step(self, actions):
        batch = self.batch
        for k, pipe in enumerate(self.pipes):
            acts = None if actions is None else \
                [actions[batch._slice(w)] for w in self.assignment[k]]
            pipe.send(("step", acts))
        self._gather()

    def reset(self, world_ids):
        ids = set(world_ids)
        for k, pipe in enumerate(self.pipes):
            pipe.send(("reset", [w for w in self.assignment[k] if w in ids]))
        self._gather()

    def _gather(self):
        batch = self.batch
        for k, pipe in enumerate(self.pipes):
            results = pipe.recv()
            for w, (obs, rew, done, info, episode, over) in zip(
                    self.assignment[k], results):
                sl = batch._slice(w)
                batch.observations[sl] = obs
                batch.rewards[sl] = rew
                batch.dones[sl] = done
                for key in batch.info:
                    batch.info[key][sl] = info[key]
                batch.episode_over[w] = over
                if episode is not None:
                    batch.episode_infos.append(episode)

    def close(self):
        for pipe in self.pipes:
            try:
                pipe.send(("stop", None))
                pipe.close()
            except (BrokenPipeError, OSError):
                pass
        for proc in self.procs:
            proc.join(timeout=5)
            if proc.is_alive():
                proc.terminate()


def _pool_worker(pipe, batch: SimBatch, world_ids: list[int]):
    worlds = [batch.worlds[w] for w in world_ids]
    obs_bufs = [np.zeros((w.n_controlled, batch.width)) for w in worlds]
    zero_info = {k: None for k in ("goal", "veh_collision", "offroad")}
    while True:
        try:
            cmd, payload = pipe.recv()
        except EOFError:
            return
        if cmd == "stop":
            return
        results = []
        if cmd == "step":
            for i, world in enumerate(worlds):
                was_over = world.episode_over
                acts = None if payload is None else payload[i]
                rew, done, info = world.step(acts, obs_out=obs_bufs[i])
                episode = world.episode_info() \
                    if world.episode_over and not was_over else None
                results.append((obs_bufs[i], rew, done, info, episode,
                                world.episode_over))
        elif cmd == "reset":
            ids = set(payload)
            for i, world in enumerate(worlds):
                if world.world_id in ids:
                    world.reset()
                # Recompute from current state either way; identical bits to
                # what the last step produced for untouched worlds.
                world.observe(obs_bufs[i])
                rew = np.zeros(world.n_controlled)
                done = world.done[world.controlled_ids].copy()
                info = {k: np.zeros(world.n_controlled, dtype=bool)
                        for k in zero_info}
                results.append((obs_bufs[i], rew, done, info, None,
                                world.episode_over))
        pipe.send(results)


# ---------------------------------------------------------------------------
# init_batch and benchmark
# ---------------------------------------------------------------------------

def init_batch(scenarios: list[PreparedScenario], cfg: SimConfig,
               n_workers: int = 1) -> SimBatch:
    """Build a batch with one world per prepared scenario entry."""
    return SimBatch(scenarios, cfg, n_workers=n_workers)


def _bench_worker_run(worlds: list[World], cfg: SimConfig, steps: int,
                      policy_spec: str, seed: int):
    policies = [make_policy(policy_spec, cfg, w, seed) for w in worlds]
    bufs = [np.zeros((w.n_controlled, obs_width(cfg.obs))) for w in worlds]
    for t in range(steps):
        for w, world in enumerate(worlds):
            if world.episode_over:
                world.reset()
            world.step(policies[w](t), obs_out=bufs[w])


def _bench_entry(pipe, worlds, cfg, steps, policy_spec, seed):
    _bench_worker_run(worlds, cfg, steps, policy_spec, seed)
    pipe.send("done")
    pipe.close()


def benchmark(scenarios: list[PreparedScenario], cfg: SimConfig,
              worlds: int, steps: int, policy: str = "random",
              n_workers: int | None = None, seed: int | None = None
              ) -> ThroughputReport:
    """Step ``worlds`` worlds for ``steps`` steps under a trivial policy and
    report agent steps per second. Observations are computed every step;
    episodes auto-reset so any step count is measurable."""
    if worlds < 1 or steps < 1:
        raise ValueError("worlds and steps must be >= 1")
    if seed is None:
        seed = cfg.seed
    _fp.warmup()
    world_objs = [World(scenarios[w % len(scenarios)], cfg, world_id=w)
                  for w in range(worlds)]
    total_agents = sum(w.n_instantiated for w in world_objs)
    controlled = sum(w.n_controlled for w in world_objs)
    if n_workers is None:
        n_workers = min(worlds, os.cpu_count() or 1)
    n_workers = max(1, min(n_workers, worlds))

    if n_workers == 1:
        start = time.perf_counter()
        _bench_worker_run(world_objs, cfg, steps, policy, seed)
        elapsed = time.perf_counter() - start
    else:
        ctx = multiprocessing.get_context("fork")
        chunks = [world_objs[k::n_workers] for k in range(n_workers)]
        start = time.perf_counter()
        pipes, procs = [], []
        for chunk in chunks:
            parent, child = ctx.Pipe()
            proc = ctx.Process(target=_bench_entry,
                               args=(child, chunk, cfg, steps, policy, seed),
                               daemon=True)
            proc.start()
            child.close()
            pipes.append(parent)
            procs.append(proc)
        for pipe in pipes:
            pipe.recv()
        for proc in procs:
            proc.join()
        elapsed = time.perf_counter() - start

    return ThroughputReport(worlds=worlds, steps=steps, elapsed_s=elapsed,
                            total_agents=total_agents,
                            controlled_agents=controlled)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

METRICS_CSV_HEADER = "scenario,episode,controlled,goal_rate,veh_collision_rate,offroad_rate"
BENCH_CSV_HEADER = "worlds,steps,total_agents,controlled_agents,elapsed_s,asps,casps"


def metrics_csv_row(e: EpisodeInfo, episode: int) -> str:
    n = max(e.n_controlled, 1)
    return (f"{e.scenario},{episode},{e.n_controlled},"
            f"{e.n_goal / n},{e.n_veh_collision / n},{e.n_offroad / n}")


def bench_csv_row(r: ThroughputReport) -> str:
    return (f"{r.worlds},{r.steps},{r.total_agents},{r.controlled_agents},"
            f"{r.elapsed_s},{r.asps},{r.casps}")
