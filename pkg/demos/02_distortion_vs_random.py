"""A query-only attacker against a trained voltage controller.

Trains the A2C controller on the six-bus feeder (about a minute with the
preset), then plays the same ten days three times: untouched, with random
noise of the same size, and with the finite-difference PGD attack. Both
perturbations stay inside an L-inf ball of 0.05 in normalized state units.

    python3 demos/02_distortion_vs_random.py [checkpoint.json]

Pass a checkpoint written by ``gridattack train`` to skip training.
"""
import sys

import numpy as np

from gridattack import data_path
from gridattack.agents import TrainConfig, load_policy, train_a2c
from gridattack.attack import AttackConfig, attack_episode, craft_perturbation, distortion_loss
from gridattack.envs import VoltageEnv, load_profile
from gridattack.grid import load_case

env = VoltageEnv(load_case(data_path("cases", "case6.json")),
                 load_profile(data_path("profiles", "case6_synthetic.csv")))

if len(sys.argv) > 1:
    policy = load_policy(sys.argv[1])
else:
    print("training A2C ...")
    policy = train_a2c(env, TrainConfig.preset("a2c", seed=0))

cfg = AttackConfig(epsilon=0.05)
results = {}
for kind in ("none", "random", "distortion"):
    recs = [attack_episode(env, policy, cfg, kind, seed=100 + i, rng=i) for i in range(10)]
    results[kind] = np.mean([r.total_reward for r in recs])
    print(f"{kind:10s} mean daily reward {results[kind]:8.3f}   "
          f"queries/step {recs[0].queries / len(recs[0].steps):5.0f}   "
          f"attack ms/step {np.mean([r.ms_per_step for r in recs]):6.2f}")

print(f"\ndegradation: random {results['none'] - results['random']:.3f}, "
      f"distortion {results['none'] - results['distortion']:.3f}")

# one crafted perturbation up close
s = env.reset(7)
a = policy.query(s)
s_adv, trace = craft_perturbation(policy, None, s, cfg)
print("\nPGD iterations on one state (objective = L2 action shift):")
for row in trace.iters:
    print(f"  iter {row['iter']:2d}  objective {row['objective']:.4f}  |delta|_inf {row['delta_norm']:.3f}")
print(f"clean action    {np.round(a, 3)}")
print(f"attacked action {np.round(policy.query(s_adv), 3)}  (shift {distortion_loss(policy, s_adv, a):.4f})")
