"""Episodic grid-operation environments."""
from .base import StepOutcome
from .diagnostic import BanditEnv, ChainEnv, chain_value_iteration
from .normalize import StateLayout, denormalize_state, normalize_state
from .profile import Profile, load_profile, save_profile
from .topology import TopologyEnv
from .voltage import RewardWeights, VoltageEnv, reward_voltage

__all__ = ["StepOutcome", "BanditEnv", "ChainEnv", "chain_value_iteration", "StateLayout", "denormalize_state", "normalize_state", "Profile", "load_profile",
           "save_profile", "TopologyEnv", "RewardWeights", "VoltageEnv", "reward_voltage"]
