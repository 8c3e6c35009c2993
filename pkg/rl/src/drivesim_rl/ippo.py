"""Independent PPO with a parameter-shared policy over all controlled agents.

Each agent contributes its own experience stream; the policy is one shared
MLP over the flat observation with categorical output over the joint
(acceleration, steering) grid. Training logs goal/collision/offroad rates
against global controlled-agent steps and wall-clock to a CSV and
checkpoints the best policy seen.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .env import EnvConfig, VecDriveEnv


@dataclass
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 5
    minibatch_size: int = 2048
    clip: float = 0.2
    lr: float = 3e-4
    adam_eps: float = 1e-5
    entropy_coef: float = 0.001
    value_coef: float = 0.5
    normalize_advantage: bool = True
    num_worlds: int = 24
    seeds: tuple = (42,)
    max_global_steps: int = 4_000_000
    time_limit_s: float = 1800.0
    target_goal_rate: float | None = None
    goal_rate_window: int = 100  # episodes in the rolling metric window
    log_every_iters: int = 1

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must be in (0, 1)")


class ActorCritic(nn.Module):
    """Two-layer MLP trunk with policy and value heads."""

    def __init__(self, obs_width: int, n_actions: int, hidden=(256, 256)):
        super().__init__()
        layers = []
        last = obs_width
        for h in hidden:
            layers += [nn.Linear(last, h), nn.Tanh()]
            last = h
        self.trunk = nn.Sequential(*layers)
        self.policy = nn.Linear(last, n_actions)
        self.value = nn.Linear(last, 1)
        nn.init.orthogonal_(self.policy.weight, gain=0.01)
        nn.init.zeros_(self.policy.bias)

    def forward(self, obs):
        z = self.trunk(obs)
        return self.policy(z), self.value(z).squeeze(-1)


@dataclass
class TrainResult:
    checkpoint_path: str
    csv_path: str
    best_goal_rate: float
    final_goal_rate: float
    global_steps: int
    wallclock_s: float
    iterations: int
    reached_target: bool


CSV_HEADER = "global_step,wallclock_s,goal_rate,veh_collision_rate,offroad_rate,loss"


class _RollingRates:
    """Rolling per-agent event rates over the last N completed episodes."""

    def __init__(self, window: int):
        self.window = window
        self.records = []

    def add(self, episodes):
        self.records.extend((e.n_controlled, e.n_goal, e.n_veh_collision,
                             e.n_offroad) for e in episodes)
        self.records = self.records[-self.window:]

    def rates(self):
        total = sum(r[0] for r in self.records)
        if total == 0:
            return 0.0, 0.0, 0.0
        return (sum(r[1] for r in self.records) / total,
                sum(r[2] for r in self.records) / total,
                sum(r[3] for r in self.records) / total)


def train_ippo(env_cfg: EnvConfig, train_cfg: TrainConfig,
               out_dir: str = "runs") -> TrainResult:
    """Train a shared policy with PPO; returns paths to the best checkpoint
    and the learning-curve CSV. Aborts with a diagnostic on NaN loss."""
    os.makedirs(out_dir, exist_ok=True)
    seed = int(train_cfg.seeds[0])
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    env_cfg.num_worlds = train_cfg.num_worlds
    env = VecDriveEnv(env_cfg)
    model = ActorCritic(env.obs_width, env.n_actions)
    optim = torch.optim.Adam(model.parameters(), lr=train_cfg.lr,
                             eps=train_cfg.adam_eps)

    T = env_cfg.rollout_length
    N = env.n_agents
    obs_buf = torch.zeros((T, N, env.obs_width))
    act_buf = torch.zeros((T, N), dtype=torch.long)
    logp_buf = torch.zeros((T, N))
    val_buf = torch.zeros((T, N))
    rew_buf = torch.zeros((T, N))
    done_buf = torch.zeros((T, N))
    active_buf = torch.zeros((T, N))

    csv_path = os.path.join(out_dir, f"curve-seed{seed}.csv")
    ckpt_path = os.path.join(out_dir, f"policy-seed{seed}.pt")
    csv = open(csv_path, "w")
    csv.write(CSV_HEADER + "\n")

    rolling = _RollingRates(train_cfg.goal_rate_window)
    obs = torch.as_tensor(env.reset(), dtype=torch.float32)
    # Agents already done (none at reset) and agents finished mid-episode
    # stop contributing transitions until their world resets.
    agent_active = torch.ones(N)

    start = time.perf_counter()
    global_steps = 0
    iteration = 0
    best_goal = -1.0
    reached = False
    last_loss = float("nan")
    goal_rate = coll_rate = off_rate = 0.0

    def save_checkpoint():
        torch.save({"model": model.state_dict(),
                    "obs_width": int(env.obs_width),
                    "n_actions": int(env.n_actions),
                    "grid_accels": [float(a) for a in env.grid.accelerations],
                    "grid_steers": [float(s) for s in env.grid.steerings],
                    "normalize_obs": bool(env.cfg.normalize_obs),
                    "seed": seed,
                    "global_steps": int(global_steps)}, ckpt_path)

    while True:
        iteration += 1
        for t in range(T):
            with torch.no_grad():
                logits, value = model(obs)
                if not torch.isfinite(logits).all():
                    csv.close()
                    env.close()
                    raise RuntimeError(
                        f"NaN/Inf policy logits at iteration {iteration}, "
                        f"step {t}; aborting")
                dist = torch.distributions.Categorical(logits=logits)
                action = dist.sample()
                logp = dist.log_prob(action)
            next_obs, rewards, dones, infos = env.step(action.numpy())
            obs_buf[t] = obs
            act_buf[t] = action
            logp_buf[t] = logp
            val_buf[t] = value
            rew_buf[t] = torch.as_tensor(rewards, dtype=torch.float32)
            done_buf[t] = torch.as_tensor(dones, dtype=torch.float32)
            active_buf[t] = agent_active
            global_steps += int(agent_active.sum())
            # A done agent leaves the stream until its world resets, at
            # which point its done flag clears and it re-enters.
            agent_active = (~torch.as_tensor(dones)).float()
            rolling.add(infos["episodes"])
            obs = torch.as_tensor(next_obs, dtype=torch.float32)

        with torch.no_grad():
            _, last_value = model(obs)

        # GAE over time; done transitions stop the bootstrap, inactive rows
        # are masked out of the update entirely.
        adv = torch.zeros((T, N))
        last_gae = torch.zeros(N)
        for t in reversed(range(T)):
            next_val = last_value if t == T - 1 else val_buf[t + 1]
            not_done = 1.0 - done_buf[t]
            delta = rew_buf[t] + train_cfg.gamma * next_val * not_done \
                - val_buf[t]
            last_gae = delta + train_cfg.gamma * train_cfg.gae_lambda \
                * not_done * last_gae
            adv[t] = last_gae
        returns = adv + val_buf

        mask = active_buf.reshape(-1) > 0
        flat_obs = obs_buf.reshape(-1, env.obs_width)[mask]
        flat_act = act_buf.reshape(-1)[mask]
        flat_logp = logp_buf.reshape(-1)[mask]
        flat_adv = adv.reshape(-1)[mask]
        flat_ret = returns.reshape(-1)[mask]
        if train_cfg.normalize_advantage and len(flat_adv) > 1:
            flat_adv = (flat_adv - flat_adv.mean()) / (flat_adv.std() + 1e-8)

        n_samples = len(flat_obs)
        mb = min(train_cfg.minibatch_size, n_samples)
        losses = []
        for _ in range(train_cfg.epochs):
            order = torch.as_tensor(rng.permutation(n_samples))
            for k in range(0, n_samples, mb):
                idx = order[k:k + mb]
                logits, value = model(flat_obs[idx])
                dist = torch.distributions.Categorical(logits=logits)
                logp = dist.log_prob(flat_act[idx])
                ratio = torch.exp(logp - flat_logp[idx])
                a = flat_adv[idx]
                pg = -torch.min(
                    ratio * a,
                    torch.clamp(ratio, 1 - train_cfg.clip,
                                1 + train_cfg.clip) * a).mean()
                v_loss = 0.5 * (value - flat_ret[idx]).pow(2).mean()
                entropy = dist.entropy().mean()
                loss = pg + train_cfg.value_coef * v_loss \
                    - train_cfg.entropy_coef * entropy
                if not torch.isfinite(loss):
                    csv.close()
                    env.close()
                    raise RuntimeError(
                        f"NaN/Inf loss at iteration {iteration} "
                        f"(pg={pg.item()}, v={v_loss.item()}, "
                        f"entropy={entropy.item()}); aborting")
                optim.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(model.parameters(), 0.5)
                optim.step()
                losses.append(loss.item())
        last_loss = float(np.mean(losses))

        goal_rate, coll_rate, off_rate = rolling.rates()
        elapsed = time.perf_counter() - start
        if iteration % train_cfg.log_every_iters == 0:
            csv.write(f"{global_steps},{elapsed:.2f},{goal_rate:.4f},"
                      f"{coll_rate:.4f},{off_rate:.4f},{last_loss:.5f}\n")
            csv.flush()
        if goal_rate > best_goal and len(rolling.records) >= 10:
            best_goal = goal_rate
            save_checkpoint()

        target = train_cfg.target_goal_rate
        if target is not None and goal_rate >= target and \
                len(rolling.records) >= train_cfg.goal_rate_window // 2:
            reached = True
            break
        if global_steps >= train_cfg.max_global_steps:
            break
        if elapsed >= train_cfg.time_limit_s:
            break

    if best_goal < 0:
        save_checkpoint()
    csv.close()
    env.close()
    return TrainResult(checkpoint_path=ckpt_path, csv_path=csv_path,
                       best_goal_rate=max(best_goal, goal_rate),
                       final_goal_rate=goal_rate,
                       global_steps=global_steps,
                       wallclock_s=time.perf_counter() - start,
                       iterations=iteration, reached_target=reached)


def load_policy(checkpoint_path: str) -> ActorCritic:
    ckpt = torch.load(checkpoint_path, weights_only=True)
    model = ActorCritic(ckpt["obs_width"], ckpt["n_actions"])
    model.load_state_dict(ckpt["model"])
    model.eval()
    return model
