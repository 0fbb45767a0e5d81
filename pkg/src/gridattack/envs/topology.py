"""Discrete-action topology control on a meshed transmission grid.

Each step the agent may toggle one line (or do nothing). Flows come from the
DC power flow. A line loaded above its rating for ``patience`` consecutive
steps trips; a disconnected network ends the episode with a penalty. Random
line outages (hazards) make the topology time-varying, so an agent that never
acts eventually loses the grid.
"""
from __future__ import annotations

import copy

import numpy as np

from ..errors import EpisodeFinished, InvalidAction, SingularNetwork
from ..grid.case import GridCase
from ..grid.powerflow import InjectionVector, ViolationReport, is_connected, susceptance_matrix
from .base import StepOutcome
from .normalize import StateLayout
from .profile import Profile

K_CASC = 100.0
PATIENCE = 3
LOADING_CAP = 2.0


class TopologyEnv:
    kind = "discrete"

    def __init__(self, case: GridCase, profile: Profile, horizon: int = 96, patience: int = PATIENCE,
                 k_casc: float = K_CASC, hazard_rate: float = 0.08, load_jitter: float = 0.03):
        self.case = case.validate()
        self.profile = profile.check_against(case)
        if profile.T < horizon:
            raise ValueError(f"profile has {profile.T} rows, horizon needs {horizon}")
        self.horizon = horizon
        self.patience = patience
        self.k_casc = k_casc
        self.hazard_rate = hazard_rate
        self.load_jitter = load_jitter
        self.n_line = case.n_line
        self.n_actions = 1 + self.n_line
        self._f, self._t = case.line_ends()
        self._x = np.array([ln.x for ln in case.lines])
        self._rating = case.ratings()
        self._slack = case.slack
        self._keep = np.arange(case.n_bus) != self._slack
        self._load_idx = np.array([case.bus_index(b) for b in profile.load_buses], dtype=int)
        self._renew_idx = np.array([case.bus_index(b) for b in profile.renew_buses], dtype=int)
        total = profile.load_p.sum(axis=1)
        self._demand_lo = total.min() * (1.0 - load_jitter)
        self._demand_hi = max(total.max() * (1.0 + load_jitter), self._demand_lo + 1e-3)
        self.base_status = case.line_status()
        entries = ([(f"loading_{k}", 0.0, LOADING_CAP) for k in range(self.n_line)]
                   + [(f"in_service_{k}", 0.0, 1.0) for k in range(self.n_line)]
                   + [("demand", self._demand_lo, self._demand_hi)])
        self.layout = StateLayout.from_entries(entries)
        self.done = True

    @property
    def state_dim(self) -> int:
        return self.layout.dim

    def reset(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self._start = int(rng.integers(0, self.profile.T - self.horizon + 1))
        self._jitter = rng.uniform(1.0 - self.load_jitter, 1.0 + self.load_jitter, len(self._load_idx))
        self._hazard_rng = np.random.default_rng(rng.integers(2 ** 63))
        self.t = 0
        self.status = self.base_status.copy()
        self.overload_count = np.zeros(self.n_line, dtype=int)
        self.done = False
        self._flow = self._solve(self.status)
        return self.state

    def injection(self, t=None) -> InjectionVector:
        t = self.t if t is None else t
        r = min(self._start + t, self.profile.T - 1)
        p = np.zeros(self.case.n_bus)
        np.add.at(p, self._load_idx, -self.profile.load_p[r] * self._jitter)
        np.add.at(p, self._renew_idx, self.profile.renew_p[r])
        return InjectionVector(p, np.zeros_like(p))

    def _solve(self, status, t=None) -> np.ndarray:
        """DC line flows for a topology; raises SingularNetwork when islanded."""
        if not is_connected(self.case.n_bus, self._f, self._t, status):
            raise SingularNetwork("network islanded")
        bmat = susceptance_matrix(self.case.n_bus, self._f, self._t, self._x, status)
        theta = np.zeros(self.case.n_bus)
        keep = self._keep
        theta[keep] = np.linalg.solve(bmat[np.ix_(keep, keep)], self.injection(t).p[keep])
        return np.where(status, (theta[self._f] - theta[self._t]) / self._x, 0.0)

    def loading(self, flow=None) -> np.ndarray:
        flow = self._flow if flow is None else flow
        return np.abs(flow) / self._rating

    def reward(self, flow, status) -> float:
        rho = np.abs(flow) / self._rating
        margin = np.where(status, np.maximum(0.0, 1.0 - rho ** 2), 0.0)
        return float(margin.sum() / self.n_line)

    def _check_action(self, a) -> int:
        if isinstance(a, (bool, np.bool_)) or not isinstance(a, (int, np.integer)):
            if isinstance(a, np.ndarray) and a.size == 1 and np.issubdtype(a.dtype, np.integer):
                a = int(a.item())
            else:
                raise InvalidAction(f"action must be an integer index, got {a!r}")
        if not 0 <= a < self.n_actions:
            raise InvalidAction(f"action {a} outside [0, {self.n_actions})")
        return int(a)

    def _terminal(self, info) -> StepOutcome:
        self.done = True
        info.update(diverged=True, survival_step=self.t, truncated=False,
                    violations=ViolationReport.empty(self.n_line, self.case.n_bus))
        self.t += 1
        return StepOutcome(self.state, -self.k_casc, True, info)

    def step(self, a) -> StepOutcome:
        if self.done:
            raise EpisodeFinished("episode is over; call reset()")
        a = self._check_action(a)
        if a > 0:
            self.status[a - 1] = not self.status[a - 1]
            self.overload_count[a - 1] = 0
        info = {"action": a, "tripped": [], "hazard": None}
        try:
            flow = self._solve(self.status)
            over = (self.loading(flow) > 1.0) & self.status
            self.overload_count = np.where(over, self.overload_count + 1, 0)
            trip = self.overload_count >= self.patience
            if trip.any():
                info["tripped"] = [int(k) for k in np.flatnonzero(trip)]
                self.status[trip] = False
                self.overload_count[trip] = 0
                flow = self._solve(self.status)
        except SingularNetwork:
            self._flow = np.zeros(self.n_line)
            return self._terminal(info)
        self._flow = flow
        reward = self.reward(flow, self.status)
        info["line_flow_p"] = flow.copy()
        info["violations"] = ViolationReport(
            np.where(self.status, np.maximum(self.loading(flow) - 1.0, 0.0), 0.0), np.zeros(self.case.n_bus))
        self.t += 1
        self.done = self.t >= self.horizon
        if not self.done:
            info["hazard"] = self._apply_hazard()
            self._flow = self._solve(self.status)
        info.update(diverged=False, survival_step=self.t, truncated=self.done)
        return StepOutcome(self.state, reward, self.done, info)

    def _apply_hazard(self):
        if self._hazard_rng.random() >= self.hazard_rate:
            return None
        candidates = []
        for k in np.flatnonzero(self.status):
            trial = self.status.copy()
            trial[k] = False
            if is_connected(self.case.n_bus, self._f, self._t, trial):
                candidates.append(int(k))
        if not candidates:
            return None
        k = candidates[int(self._hazard_rng.integers(len(candidates)))]
        self.status[k] = False
        self.overload_count[k] = 0
        return k

    def raw_state(self) -> np.ndarray:
        r = min(self._start + self.t, self.profile.T - 1)
        demand = float((self.profile.load_p[r] * self._jitter).sum())
        return np.r_[self.loading(), self.status.astype(float), demand]

    @property
    def state(self) -> np.ndarray:
        return self.layout.normalize(self.raw_state())

    def copy(self) -> TopologyEnv:
        other = copy.copy(self)
        for name in ("status", "overload_count", "_flow", "_jitter"):
            if hasattr(self, name):
                setattr(other, name, getattr(self, name).copy())
        if hasattr(self, "_hazard_rng"):
            other._hazard_rng = copy.deepcopy(self._hazard_rng)
        return other
