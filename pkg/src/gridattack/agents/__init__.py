"""Trainable controllers and the model-based baseline."""
from .a2c import train_a2c
from .baselines import ConstantPolicy, RandomPolicy
from .config import TrainConfig
from .dqn import train_dqn
from .mpc import MpcController, MpcPolicy, ForecastWindow, mpc_act, ptdf_matrix
from .nn import Adam, DuelingQNet, Mlp
from .replay import ReplayBuffer
from .policy import GaussianPolicy, Policy, QPolicy, load_policy, save_policy

__all__ = ["train_a2c", "ConstantPolicy", "RandomPolicy", "MpcController", "MpcPolicy", "ForecastWindow",
           "mpc_act", "ptdf_matrix", "train_dqn", "ReplayBuffer", "TrainConfig", "Adam", "DuelingQNet", "Mlp", "GaussianPolicy", "Policy", "QPolicy",
           "load_policy", "save_policy"]
