"""Steering a controller into overloading a chosen line, and when it fails.

The manipulation attacker probes a copy of the grid one step ahead and
perturbs the observation so the controller's own action pushes line 3-6
toward its rating. The true grid is never touched.

Part 1 uses a simple rule-based controller that charges the battery when it
reads the state of charge as low. At the evening peak a 0.05 nudge on that
reading is enough to make it charge, and the line goes over its rating.

Part 2 runs the same attack on the trained A2C controller. That controller
discharges whenever it can, so the battery is empty by the evening peak and
its storage command sits far on the discharge side of the clamp. No small
perturbation turns it into a charging command, and the attack finds nothing
to pull.

    python3 demos/03_manipulation.py [checkpoint.json]
"""
import sys

import numpy as np

from gridattack import data_path
from gridattack.agents import Policy, TrainConfig, load_policy, train_a2c
from gridattack.attack import AttackConfig, ManipulationTarget, attack_episode, craft_perturbation, manipulation_loss
from gridattack.envs import Profile, VoltageEnv, load_profile
from gridattack.grid import load_case

case = load_case(data_path("cases", "case6.json"))
profile = load_profile(data_path("profiles", "case6_synthetic.csv"))
target = ManipulationTarget.line(case, 3, 6)
cfg = AttackConfig(epsilon=0.05)


class ChargeWhenLow(Policy):
    def __init__(self, env):
        super().__init__(env.state_dim, env.action_dim)
        self.col = env.layout.index("soc_6")

    def query_batch(self, states):
        s = self._check(states)
        out = np.zeros((len(s), 5))
        out[:, 4] = np.where(s[:, self.col] < 0.5, -0.3, 0.0)
        return out


print("part 1: rule-based controller at the evening peak")
peak = int(np.argmax(profile.load_p[:, 2]))
rows = slice(peak, peak + 96)
env = VoltageEnv(case, Profile(profile.load_buses, profile.load_p[rows], profile.load_q[rows],
                               profile.renew_buses, profile.renew_p[rows]), load_jitter=0.0)
s = env.reset(0)
rule = ChargeWhenLow(env)
s_adv, trace = craft_perturbation(rule, env.copy(), s, AttackConfig(epsilon=0.05, objective="manipulation"), target)
soc = env.layout.index("soc_6")
print(f"  SoC reading {s[soc]:.3f} -> {s_adv[soc]:.3f} after {trace.total_queries} policy queries")
print(f"  distance to rating (rating - |flow|): clean {manipulation_loss(rule, env.copy(), s, target):+.4f}, "
      f"attacked {manipulation_loss(rule, env.copy(), s_adv, target):+.4f}")

print("\npart 2: trained A2C over eight days")
env = VoltageEnv(case, profile)
policy = load_policy(sys.argv[1]) if len(sys.argv) > 1 else train_a2c(env, TrainConfig.preset("a2c", seed=0))
for kind in ("none", "manipulation"):
    recs = [attack_episode(env, policy, cfg, kind, target=target, seed=200 + i, target_line=target.element)
            for i in range(8)]
    print(f"  {kind:13s} worst margin (flow - rating) {np.mean([r.max_margin for r in recs]):+.4f}, "
          f"days with an overload {np.mean([r.overload_steps > 0 for r in recs]):.0%}")
rec = attack_episode(env, policy, cfg, "none", seed=200, target_line=target.element)
k = int(np.argmax([abs(st.line_flow_p[target.element]) for st in rec.steps]))
st = rec.steps[k]
print(f"  at the day's heaviest step the SoC reads {st.s_clean[soc]:.2f} and the raw storage command is "
      f"{policy.query(st.s_clean)[4]:+.3f} p.u. (positive = discharge), applied as {st.action[4]:+.3f}")
