"""Gym-style environment and IPPO trainer over the drivesim batch engine."""

from .env import EnvConfig, VecDriveEnv
from .ippo import ActorCritic, TrainConfig, TrainResult, load_policy, train_ippo

__version__ = "0.1.0"
