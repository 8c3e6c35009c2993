import pytest

from drivesim.engine import SimConfig
from drivesim.observation import ObsConfig
from drivesim.scenario import preprocess
from drivesim.synthetic import SyntheticSpec, generate_synthetic

from drivesim_rl import EnvConfig


def small_obs():
    return ObsConfig(max_agents_obs=8, max_road_points_obs=16)


@pytest.fixture(scope="session")
def straight_scenarios():
    return [preprocess(generate_synthetic(
        SyntheticSpec("straight_road", n_agents=4, seed=s)))
        for s in range(3)]


@pytest.fixture
def env_cfg(straight_scenarios):
    return EnvConfig(scenarios=straight_scenarios, num_worlds=3,
                     sim=SimConfig(collision_behavior="remove_agent",
                                   obs=small_obs()))
