"""Continuous-action voltage regulation on a small distribution feeder.

The agent sets active/reactive power of the non-slack generators and the
charge rate of each storage unit. Every step solves the AC power flow and
pays for losses, line overloads and voltage-band excursions.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from ..errors import EpisodeFinished, DimensionMismatch
from ..grid.case import GridCase
from ..grid.powerflow import (
    InjectionVector,
    PowerFlowSolution,
    ViolationReport,
    ac_power_flow,
    ac_power_flow_batch,
    build_admittance,
    check_violations,
)
from .base import StepOutcome
from .normalize import StateLayout
from .profile import Profile

K_DIV = 100.0
HORIZON = 96
DT_HOURS = 0.25


@dataclass(frozen=True)
class RewardWeights:
    loss: float = 1.0
    line: float = 1.0
    voltage: float = 1.0


def reward_voltage(sol: PowerFlowSolution, vio: ViolationReport, a=None,
                   weights: RewardWeights = RewardWeights(), k_div: float = K_DIV) -> float:
    """Negative weighted operating cost; a diverged power flow costs ``k_div`` outright."""
    if not sol.converged:
        return -k_div
    cost = (weights.loss * max(sol.losses, 0.0)
            + weights.line * float(np.sum(vio.line_overloads))
            + weights.voltage * float(np.sum(vio.voltage_violations)))
    return -cost


class VoltageEnv:
    kind = "continuous"

    def __init__(self, case: GridCase, profile: Profile, horizon: int = HORIZON, dt_hours: float = DT_HOURS,
                 weights: RewardWeights = RewardWeights(), k_div: float = K_DIV, load_jitter: float = 0.03,
                 soc_init=None):
        self.case = case.validate()
        self.profile = profile.check_against(case)
        if profile.T < horizon:
            raise ValueError(f"profile has {profile.T} rows, horizon needs {horizon}")
        self.horizon = horizon
        self.dt = dt_hours
        self.weights = weights
        self.k_div = k_div
        self.load_jitter = load_jitter
        self.ybus = build_admittance(case)

        slack = case.slack
        self.gens = [g for g in case.generators if case.bus_index(g.bus) != slack]
        self.storage = list(case.storage)
        self._load_idx = np.array([case.bus_index(b) for b in profile.load_buses], dtype=int)
        self._gen_idx = np.array([case.bus_index(g.bus) for g in self.gens], dtype=int)
        self._sto_idx = np.array([case.bus_index(s.bus) for s in self.storage], dtype=int)
        renew_col = {b: k for k, b in enumerate(profile.renew_buses)}
        self._renew_col = np.array([renew_col.get(g.bus, -1) for g in self.gens], dtype=int)
        self.soc_init = (np.array([s.soc for s in self.storage], float) if soc_init is None
                         else np.asarray(soc_init, float))
        self._capacity = np.array([s.capacity for s in self.storage], float)
        self._eff = np.array([s.efficiency for s in self.storage], float)

        names, lo, hi = [], [], []
        for g in self.gens:
            names += [f"gen{g.bus}_p", f"gen{g.bus}_q"]
            lo += [g.p_min, g.q_min]
            hi += [g.p_max, g.q_max]
        for s in self.storage:
            names.append(f"storage{s.bus}_p")
            lo.append(-s.p_charge_max)
            hi.append(s.p_charge_max)
        self.action_names = tuple(names)
        self.action_low = np.array(lo, float)
        self.action_high = np.array(hi, float)
        self.layout = self._build_layout()
        self.done = True

    @property
    def state_dim(self) -> int:
        return self.layout.dim

    @property
    def action_dim(self) -> int:
        return len(self.action_names)

    def _build_layout(self) -> StateLayout:
        pr, case = self.profile, self.case
        j = 1.0 + self.load_jitter
        entries = []
        for k, b in enumerate(pr.load_buses):
            entries.append((f"load_p_{b}", 0.0, max(pr.load_p[:, k].max() * j, 1e-3)))
        for k, b in enumerate(pr.load_buses):
            lo = min(0.0, pr.load_q[:, k].min() * j)
            entries.append((f"load_q_{b}", lo, max(pr.load_q[:, k].max() * j, lo + 1e-3)))
        for g in self.gens:
            if g.bus in pr.renew_buses:
                entries.append((f"renew_p_{g.bus}", 0.0, max(g.p_max, 1e-3)))
        for s in self.storage:
            entries.append((f"soc_{s.bus}", 0.0, max(s.capacity, 1e-3)))
        for b in case.buses:
            entries.append((f"v_{b.id}", b.v_min - 0.1, b.v_max + 0.1))
        for name, lo, hi in zip(self.action_names, self.action_low, self.action_high):
            entries.append((f"prev_{name}", lo, hi if hi > lo else lo + 1e-3))
        return StateLayout.from_entries(entries)

    # exogenous inputs at the current step
    def _row(self, t: int) -> int:
        return min(self._start + t, self.profile.T - 1)

    def exogenous(self, t=None):
        t = self.t if t is None else t
        r = self._row(t)
        return (self.profile.load_p[r] * self._jitter, self.profile.load_q[r] * self._jitter,
                self.profile.renew_p[r])

    def availability(self, t=None) -> np.ndarray:
        """Upper bound on each generator's P at step ``t`` (renewables capped by the profile)."""
        _, _, renew = self.exogenous(t)
        cap = np.array([g.p_max for g in self.gens], float)
        has = self._renew_col >= 0
        cap[has] = np.minimum(cap[has], renew[self._renew_col[has]])
        return cap

    def reset(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self._start = int(rng.integers(0, self.profile.T - self.horizon + 1))
        self._jitter = rng.uniform(1.0 - self.load_jitter, 1.0 + self.load_jitter, len(self._load_idx))
        self.t = 0
        self.soc = self.soc_init.copy()
        self.prev_action = np.clip(0.0, self.action_low, self.action_high)
        self._v = np.ones(self.case.n_bus, dtype=complex)
        self.done = False
        sol = self._solve(self.clamp_action(self.prev_action), self.t)
        if sol.converged:
            self._v = sol.voltage
        return self.state

    def clamp_action(self, a, t=None, soc=None) -> np.ndarray:
        """Project a raw action onto device boxes, renewable availability and SoC limits."""
        a = np.asarray(a, float)
        if a.shape != (self.action_dim,):
            raise DimensionMismatch(f"action has shape {a.shape}, expected ({self.action_dim},)")
        a = np.clip(np.nan_to_num(a), self.action_low, self.action_high)
        n_g = len(self.gens)
        if n_g:
            a[0:2 * n_g:2] = np.minimum(a[0:2 * n_g:2], self.availability(t))
        if len(self.storage):
            soc = self.soc if soc is None else soc
            p = a[2 * n_g:]
            max_dis = soc * self._eff / self.dt
            max_ch = (self._capacity - soc) / (self._eff * self.dt)
            a[2 * n_g:] = np.clip(p, -max_ch, max_dis)
        return a

    def injection(self, a_applied, t=None) -> InjectionVector:
        load_p, load_q, _ = self.exogenous(t)
        n = self.case.n_bus
        p, q = np.zeros(n), np.zeros(n)
        np.add.at(p, self._load_idx, -load_p)
        np.add.at(q, self._load_idx, -load_q)
        n_g = len(self.gens)
        np.add.at(p, self._gen_idx, a_applied[0:2 * n_g:2])
        np.add.at(q, self._gen_idx, a_applied[1:2 * n_g:2])
        np.add.at(p, self._sto_idx, a_applied[2 * n_g:])
        return InjectionVector(p, q)

    def _solve(self, a_applied, t) -> PowerFlowSolution:
        return ac_power_flow(self.case, self.injection(a_applied, t), v_init=self._v, ybus=self.ybus)

    def _next_soc(self, a_applied) -> np.ndarray:
        p = a_applied[2 * len(self.gens):]
        delta = np.where(p >= 0, -p * self.dt / self._eff, -p * self.dt * self._eff)
        return np.clip(self.soc + delta, 0.0, self._capacity)

    def simulate(self, a):
        """One-step lookahead from the current true state; nothing is mutated.

        Returns ``(solution, violations, reward, applied_action)``.
        """
        applied = self.clamp_action(a)
        sol = self._solve(applied, self.t)
        vio = check_violations(self.case, sol) if sol.converged else ViolationReport.empty(
            self.case.n_line, self.case.n_bus)
        return sol, vio, reward_voltage(sol, vio, applied, self.weights, self.k_div), applied

    def simulate_batch(self, actions) -> list:
        """:meth:`simulate` for each row of ``actions``, solved as one batch."""
        applied = np.array([self.clamp_action(a) for a in np.atleast_2d(actions)])
        inj = [self.injection(a, self.t) for a in applied]
        sols = ac_power_flow_batch(self.case, np.array([i.p for i in inj]), np.array([i.q for i in inj]),
                                   v_init=self._v, ybus=self.ybus)
        out = []
        for sol, a in zip(sols, applied):
            vio = check_violations(self.case, sol) if sol.converged else ViolationReport.empty(
                self.case.n_line, self.case.n_bus)
            out.append((sol, vio, reward_voltage(sol, vio, a, self.weights, self.k_div), a))
        return out

    def step(self, a) -> StepOutcome:
        if self.done:
            raise EpisodeFinished("episode is over; call reset()")
        sol, vio, reward, applied = self.simulate(a)
        diverged = not sol.converged
        self.soc = self._next_soc(applied)
        if not diverged:
            self._v = sol.voltage
        self.prev_action = applied
        self.t += 1
        self.done = diverged or self.t >= self.horizon
        info = {
            "violations": vio,
            "diverged": diverged,
            "survival_step": self.t - int(diverged),
            "truncated": self.done and not diverged,
            "solution": sol,
            "action": applied,
        }
        return StepOutcome(self.state, reward, self.done, info)

    def raw_state(self) -> np.ndarray:
        load_p, load_q, renew = self.exogenous()
        renew_obs = [renew[c] for c in self._renew_col if c >= 0]
        return np.r_[load_p, load_q, renew_obs, self.soc, np.abs(self._v), self.prev_action]

    @property
    def state(self) -> np.ndarray:
        return self.layout.normalize(self.raw_state())

    def copy(self) -> VoltageEnv:
        """Independent copy sharing the immutable case and profile."""
        other = copy.copy(self)
        for name in ("soc", "prev_action", "_v", "_jitter"):
            if hasattr(self, name):
                setattr(other, name, getattr(self, name).copy())
        return other
