import csv as csv_mod
import math

import numpy as np
import pytest
import torch

from drivesim.engine import SimConfig
from drivesim.scenario import preprocess
from drivesim.synthetic import SyntheticSpec, generate_synthetic

from conftest import small_obs
from drivesim_rl import (ActorCritic, EnvConfig, TrainConfig, VecDriveEnv,
                         load_policy, train_ippo)
from drivesim_rl.ippo import CSV_HEADER, _RollingRates


def quick_env_cfg(scenarios, num_worlds=4):
    return EnvConfig(scenarios=scenarios, num_worlds=num_worlds,
                     sim=SimConfig(collision_behavior="remove_agent",
                                   obs=small_obs()))


def test_train_config_defaults_match_stated_hyperparameters():
    cfg = TrainConfig()
    assert cfg.gamma == 0.99
    assert cfg.gae_lambda == 0.95
    assert cfg.epochs == 5
    assert cfg.minibatch_size == 2048
    assert cfg.clip == 0.2
    assert cfg.lr == 3e-4
    assert cfg.adam_eps == 1e-5
    assert cfg.entropy_coef == 0.001
    assert cfg.value_coef == 0.5
    assert cfg.normalize_advantage is True


def test_train_config_validates_clip():
    with pytest.raises(ValueError):
        TrainConfig(clip=1.5)


def test_rolling_rates_window():
    from drivesim.engine import EpisodeInfo
    r = _RollingRates(window=2)
    r.add([EpisodeInfo("a", 0, 4, 0, 0, 0)])
    r.add([EpisodeInfo("b", 1, 4, 4, 0, 0), EpisodeInfo("c", 2, 4, 4, 0, 0)])
    assert r.rates() == (1.0, 0.0, 0.0)  # first record fell out of window


def test_short_training_produces_artifacts(tmp_path, straight_scenarios):
    env_cfg = quick_env_cfg(straight_scenarios)
    train_cfg = TrainConfig(num_worlds=4, max_global_steps=8_000,
                            time_limit_s=120.0, seeds=(7,))
    res = train_ippo(env_cfg, train_cfg, out_dir=str(tmp_path))
    assert res.global_steps >= 8_000 or res.wallclock_s >= 120.0
    with open(res.csv_path) as f:
        rows = list(csv_mod.reader(f))
    assert ",".join(rows[0]) == CSV_HEADER
    assert len(rows) >= 2
    steps = [int(r[0]) for r in rows[1:]]
    assert steps == sorted(steps)
    for r in rows[1:]:
        assert math.isfinite(float(r[5]))
    model = load_policy(res.checkpoint_path)
    assert isinstance(model, ActorCritic)
    env = VecDriveEnv(env_cfg)
    obs = torch.as_tensor(env.reset(), dtype=torch.float32)
    logits, value = model(obs)
    assert logits.shape == (env.n_agents, env.n_actions)
    assert torch.isfinite(logits).all() and torch.isfinite(value).all()
    env.close()


def test_nan_loss_aborts_with_diagnostic(tmp_path, straight_scenarios):
    env_cfg = quick_env_cfg(straight_scenarios, num_worlds=2)
    train_cfg = TrainConfig(num_worlds=2, lr=1e18, max_global_steps=200_000,
                            time_limit_s=120.0, seeds=(3,))
    with pytest.raises(RuntimeError, match="NaN|Inf"):
        train_ippo(env_cfg, train_cfg, out_dir=str(tmp_path))


def _policy_entropy(res, env_cfg):
    model = load_policy(res.checkpoint_path)
    env = VecDriveEnv(env_cfg)
    obs = torch.as_tensor(env.reset(), dtype=torch.float32)
    with torch.no_grad():
        logits, _ = model(obs)
    env.close()
    return float(torch.distributions.Categorical(logits=logits)
                 .entropy().mean())


def test_zero_entropy_coefficient_collapses_policy(tmp_path,
                                                   straight_scenarios):
    # On a task with a deterministic optimum, removing the entropy bonus
    # lets the policy concentrate; a large bonus keeps it spread out.
    env_cfg = quick_env_cfg(straight_scenarios, num_worlds=4)
    steps = 60_000
    sharp = train_ippo(env_cfg,
                       TrainConfig(num_worlds=4, entropy_coef=0.0,
                                   max_global_steps=steps, seeds=(11,),
                                   time_limit_s=300.0),
                       out_dir=str(tmp_path / "sharp"))
    spread = train_ippo(env_cfg,
                        TrainConfig(num_worlds=4, entropy_coef=0.1,
                                    max_global_steps=steps, seeds=(11,),
                                    time_limit_s=300.0),
                        out_dir=str(tmp_path / "spread"))
    e_sharp = _policy_entropy(sharp, env_cfg)
    e_spread = _policy_entropy(spread, env_cfg)
    init_entropy = math.log(91)
    assert e_sharp < e_spread
    assert e_sharp < 0.6 * init_entropy
