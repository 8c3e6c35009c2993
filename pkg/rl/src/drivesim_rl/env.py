"""Gym-style vector environment over the native batch engine.

One row per controlled agent across all worlds: reset() returns an
observation matrix of shape (n_agents, obs_width) and step() the classic
(obs, rewards, dones, infos) quadruple, with finished worlds auto-reset so
the stream never stalls. Buffers are views over the engine's flat arrays;
rewards pass through untouched.

Actions are joint indices into an ActionGrid (discrete) or raw
(accel, steer) float rows (continuous passthrough, used e.g. to replay
inverted expert actions).

Observations are scaled in place for learners: positions by 1/range,
speeds by 1/v_max; sizes by 1/10; flags and one-hots untouched. Pass
normalize_obs=False for raw engine values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from drivesim.dynamics import ActionGrid
from drivesim.engine import SimBatch, SimConfig
from drivesim.observation import RAY_WIDTH, ROAD_SLOT_WIDTH, obs_width
from drivesim.scenario import PreparedScenario, load_prepared

DEFAULT_ROLLOUT_LENGTH = 92


@dataclass
class EnvConfig:
    scenario_paths: list = field(default_factory=list)
    scenarios: list = field(default_factory=list)  # PreparedScenario objects
    sim: SimConfig = None
    num_worlds: int = 4
    rollout_length: int = DEFAULT_ROLLOUT_LENGTH
    grid: ActionGrid = field(default_factory=ActionGrid)
    normalize_obs: bool = True
    n_workers: int = 1

    def __post_init__(self):
        if self.rollout_length < 1:
            raise ValueError("rollout_length must be >= 1")
        if self.sim is None:
            self.sim = SimConfig(collision_behavior="remove_agent")


def _obs_scale(cfg: SimConfig) -> np.ndarray:
    """Per-feature divisors for the flat observation vector."""
    obs = cfg.obs
    pos = obs.radius if obs.mode == "radial" else obs.max_range
    ego = np.array([cfg.v_max, 10.0, 10.0, pos, pos, pos, 1.0])
    if obs.mode == "radial":
        partner = np.array([pos, pos, np.pi, cfg.v_max, 10.0, 10.0, 1.0])
        road = np.concatenate([[pos, pos, np.pi],
                               np.ones(ROAD_SLOT_WIDTH - 3)])
        return np.concatenate([ego,
                               np.tile(partner, obs.max_agents_obs),
                               np.tile(road, obs.max_road_points_obs)])
    ray = np.concatenate([[obs.max_range], np.ones(RAY_WIDTH - 1)])
    return np.concatenate([ego, np.tile(ray, obs.n_rays)])


class VecDriveEnv:
    """Vectorized per-agent environment; auto-resets finished worlds."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        scenarios = list(cfg.scenarios)
        for path in cfg.scenario_paths:
            with open(path) as f:
                scenarios.append(load_prepared(f.read()))
        if not scenarios:
            raise ValueError("EnvConfig needs scenarios or scenario_paths")
        self.scenarios: list[PreparedScenario] = [
            scenarios[w % len(scenarios)] for w in range(cfg.num_worlds)]
        self.batch = SimBatch(self.scenarios, cfg.sim,
                              n_workers=cfg.n_workers)
        self.grid = cfg.grid
        self.n_agents = self.batch.n_controlled
        self.obs_width = obs_width(cfg.sim.obs)
        self.n_actions = self.grid.size
        self._scale = _obs_scale(cfg.sim) if cfg.normalize_obs else None
        self._accels = np.array(self.grid.accelerations)
        self._steers = np.array(self.grid.steerings)

    # -- gym-style surface --------------------------------------------------

    def reset(self) -> np.ndarray:
        obs = self.batch.reset()
        return self._post_obs(obs)

    def step(self, actions):
        """actions: (n_agents,) joint indices or (n_agents, >=2) floats."""
        cont = self.to_continuous(actions)
        out = self.batch.step(cont)
        rewards = out.rewards
        dones = out.dones.copy()
        infos = {k: v.copy() for k, v in out.info.items()}
        # Episode records only appear during a step; hand them out here.
        infos["episodes"] = self.batch.episode_infos[:]
        self.batch.episode_infos.clear()
        finished = np.nonzero(self.batch.episode_over)[0]
        if len(finished):
            self.batch.reset(world_ids=finished.tolist())
        obs = self._post_obs(self.batch.observations)
        return obs, rewards, dones, infos

    def to_continuous(self, actions) -> np.ndarray:
        actions = np.asarray(actions)
        if actions.ndim == 2:
            return actions.astype(float)
        ai, si = np.divmod(actions.astype(np.int64), len(self._steers))
        return np.column_stack([self._accels[ai], self._steers[si]])

    def _post_obs(self, obs: np.ndarray) -> np.ndarray:
        if self._scale is None:
            return obs
        return obs / self._scale

    def close(self):
        self.batch.close()
