"""Why line 3-6 is the interesting target on the six-bus feeder.

At the evening peak the storage unit at bus 6 sits behind line 3-6, which
already runs close to its rating. Idle storage keeps the line inside its
limit; charging at full rate pushes it over. This is the physical lever the
manipulation attack pulls.

    python3 demos/01_peak_overload.py
"""
import numpy as np

from gridattack import data_path
from gridattack.envs import Profile, VoltageEnv, load_profile
from gridattack.grid import load_case

case = load_case(data_path("cases", "case6.json"))
profile = load_profile(data_path("profiles", "case6_synthetic.csv"))
line = case.line_index(3, 6)
rating = case.lines[line].rating

peak = int(np.argmax(profile.load_p[:, 2]))
print(f"bus-6 load peaks at row {peak} ({peak % 96 / 4:.2f} h): {profile.load_p[peak, 2]:.3f} p.u.")

# a one-day window that starts at the peak, so reset() lands on it
rows = slice(peak, peak + 96)
window = Profile(profile.load_buses, profile.load_p[rows], profile.load_q[rows], profile.renew_buses,
                 profile.renew_p[rows])
env = VoltageEnv(case, window, load_jitter=0.0)
env.reset(0)

for storage in (0.0, -0.15, -0.3):
    a = np.array([0.0, 0.0, 0.0, 0.0, storage])
    sol, vio, reward, applied = env.simulate(a)
    flow = abs(sol.line_flow_p[line])
    print(f"storage {storage:+.2f} p.u. -> line 3-6 carries {flow:.4f} p.u. "
          f"(rating {rating}), margin {rating - flow:+.4f}, reward {reward:.3f}")
