"""How long a line-switching agent keeps a 14-bus grid alive under attack.

A dueling double DQN learns to toggle lines so that overloads clear before
they trip and random outages do not cascade. The distortion attack pushes
the agent's greedy choice away from what it would have done, which is
enough to shorten survival sharply.

    python3 demos/04_topology_survival.py [checkpoint.json]
"""
import sys

import numpy as np

from gridattack import data_path
from gridattack.agents import ConstantPolicy, TrainConfig, load_policy, train_dqn
from gridattack.attack import AttackConfig, attack_episode
from gridattack.envs import TopologyEnv, load_profile
from gridattack.grid import load_case

env = TopologyEnv(load_case(data_path("cases", "case14.json")),
                  load_profile(data_path("profiles", "case14_synthetic.csv")))
policy = load_policy(sys.argv[1]) if len(sys.argv) > 1 else train_dqn(env, TrainConfig.preset("dqn", seed=0))

cfg = AttackConfig(epsilon=0.05)
for name, pol, kind in (("no-op baseline", ConstantPolicy(env), "none"), ("DQN", policy, "none"),
                        ("DQN + random", policy, "random"), ("DQN + distortion", policy, "distortion")):
    recs = [attack_episode(env, pol, cfg, kind, seed=300 + i, rng=i) for i in range(30)]
    print(f"{name:17s} survival {np.mean([r.survival_steps for r in recs]):5.1f} / 96 steps, "
          f"reward {np.mean([r.total_reward for r in recs]):8.2f}")
