"""Regenerate the bundled cases and synthetic profiles under src/gridattack/data/.

Run from the repository root:  python scripts/build_bundled_data.py
Outputs are deterministic.
"""
import numpy as np

from gridattack import data_path
from gridattack.envs.profile import save_profile, synthetic_profile
from gridattack.grid.case import Bus, GridCase, Generator, Line, Storage, save_case
from gridattack.grid.powerflow import InjectionVector, dc_power_flow


def case6() -> GridCase:
    # Radial six-bus feeder: slack at 1, residential/commercial loads at 4-6,
    # solar at 4, wind at 5, storage at 6 behind the tight line 3-6. Lines are
    # resistive enough that losses and voltage both depend on the setpoints,
    # and 3-6 runs close to its rating at the evening peak. The voltage band is
    # tight, so the best setpoints often sit right at a band edge.
    buses = [Bus(1, "slack")] + [Bus(i, "PQ", 0.97, 1.03, 0.0) for i in range(2, 7)]
    lines = [
        Line(1, 2, 0.02, 0.04, 0.0, 2.0),
        Line(2, 3, 0.05, 0.06, 0.0, 1.0),
        Line(2, 4, 0.06, 0.06, 0.0, 0.7),
        Line(3, 5, 0.05, 0.06, 0.0, 0.6),
        Line(3, 6, 0.06, 0.06, 0.0, 0.5),
    ]
    gens = [
        Generator(1, -10.0, 10.0, -10.0, 10.0, 0.0),
        Generator(4, 0.0, 0.9, -0.4, 0.4, 0.0),
        Generator(5, 0.0, 0.4, -0.4, 0.4, 0.0),
    ]
    storage = [Storage(6, 1.0, 0.5, 0.3, 0.9)]
    return GridCase(buses, lines, gens, storage, 100.0).validate()


def case6_profile():
    return synthetic_profile(
        peaks={4: 0.25, 5: 0.25, 6: 0.45},
        kinds={4: "residential", 5: "commercial", 6: "residential"},
        pf={4: 0.3, 5: 0.35, 6: 0.3},
        renew={4: ("solar", 0.9), 5: ("wind", 0.4)},
        days=8, seed=6,
    )


# IEEE 14-bus branch data (r, x, b) with ratings sized to the synthetic peak.
_IEEE14_BRANCHES = [
    (1, 2, 0.01938, 0.05917, 0.0528), (1, 5, 0.05403, 0.22304, 0.0492), (2, 3, 0.04699, 0.19797, 0.0438),
    (2, 4, 0.05811, 0.17632, 0.0340), (2, 5, 0.05695, 0.17388, 0.0346), (3, 4, 0.06701, 0.17103, 0.0128),
    (4, 5, 0.01335, 0.04211, 0.0), (4, 7, 0.0, 0.20912, 0.0), (4, 9, 0.0, 0.55618, 0.0),
    (5, 6, 0.0, 0.25202, 0.0), (6, 11, 0.09498, 0.19890, 0.0), (6, 12, 0.12291, 0.25581, 0.0),
    (6, 13, 0.06615, 0.13027, 0.0), (7, 8, 0.0, 0.17615, 0.0), (7, 9, 0.0, 0.11001, 0.0),
    (9, 10, 0.03181, 0.08450, 0.0), (9, 14, 0.12711, 0.27038, 0.0), (10, 11, 0.08205, 0.19207, 0.0),
    (12, 13, 0.22092, 0.19988, 0.0), (13, 14, 0.17093, 0.34802, 0.0),
]
_IEEE14_LOAD_MW = {2: 21.7, 3: 94.2, 4: 47.8, 5: 7.6, 6: 11.2, 9: 29.5, 10: 9.0, 11: 3.5, 12: 6.1, 13: 13.5,
                   14: 14.9}
_IEEE14_LOAD_MVAR = {2: 12.7, 3: 19.0, 4: -3.9, 5: 1.6, 6: 7.5, 9: 16.6, 10: 5.8, 11: 1.8, 12: 1.6, 13: 5.8,
                     14: 5.0}
_LOAD_SCALE = 1.15


def case14_profile():
    peaks = {b: _LOAD_SCALE * mw / 100.0 for b, mw in _IEEE14_LOAD_MW.items()}
    kinds = {b: ("commercial" if b in (3, 4, 9) else "residential") for b in peaks}
    pf = {b: _IEEE14_LOAD_MVAR[b] / _IEEE14_LOAD_MW[b] for b in peaks}
    return synthetic_profile(peaks, kinds, pf, renew={2: ("wind", 0.8), 6: ("solar", 0.4)}, days=8, seed=14)


def case14(profile) -> GridCase:
    buses = [Bus(i, "slack" if i == 1 else ("PV" if i in (2, 3, 6, 8) else "PQ")) for i in range(1, 15)]
    lines = [Line(f, t, r, x, b, 1.0) for f, t, r, x, b in _IEEE14_BRANCHES]
    gens = [
        Generator(1, -5.0, 5.0, -5.0, 5.0, 0.0),
        Generator(2, 0.0, 0.8, -0.4, 0.5, 0.0),
        Generator(6, 0.0, 0.4, -0.06, 0.24, 0.0),
    ]
    base = GridCase(buses, lines, gens, [], 100.0)
    # rating = 115% of the largest intact-topology flow over the whole profile,
    # floored so lightly used lines are not trivially overloaded
    idx = {b: base.bus_index(b) for b in range(1, 15)}
    worst = np.zeros(len(lines))
    for r in range(profile.T):
        p = np.zeros(14)
        for k, b in enumerate(profile.load_buses):
            p[idx[b]] -= profile.load_p[r, k]
        for k, b in enumerate(profile.renew_buses):
            p[idx[b]] += profile.renew_p[r, k]
        worst = np.maximum(worst, np.abs(dc_power_flow(base, InjectionVector(p, np.zeros(14))).line_flow_p))
    ratings = np.maximum(np.round(1.15 * worst, 2), 0.1)
    lines = [Line(f, t, r, x, b, float(rt)) for (f, t, r, x, b), rt in zip(_IEEE14_BRANCHES, ratings)]
    return GridCase(buses, lines, gens, [], 100.0).validate()


def main():
    save_case(case6(), data_path("cases", "case6.json"))
    save_profile(case6_profile(), data_path("profiles", "case6_synthetic.csv"))
    p14 = case14_profile()
    save_case(case14(p14), data_path("cases", "case14.json"))
    save_profile(p14, data_path("profiles", "case14_synthetic.csv"))


if __name__ == "__main__":
    main()
