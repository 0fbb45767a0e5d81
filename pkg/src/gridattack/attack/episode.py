"""Run one evaluation episode with an attacker between the sensors and the policy."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import AttackConfig, ManipulationTarget
from .pgd import craft_perturbation, random_perturbation

ATTACK_KINDS = ("none", "random", "distortion", "manipulation")


@dataclass
class StepRecord:
    t: int
    s_clean: np.ndarray
    s_adv: np.ndarray
    action: np.ndarray | int
    reward: float
    line_overloads: np.ndarray
    voltage_violations: np.ndarray
    diverged: bool
    queries: int
    ms: float
    line_flow_p: np.ndarray | None = None

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x, float).tolist()
        return {"t": self.t, "s_clean": arr(self.s_clean), "s_adv": arr(self.s_adv),
                "action": self.action if isinstance(self.action, int) else arr(self.action),
                "reward": self.reward, "line_overloads": arr(self.line_overloads),
                "voltage_violations": arr(self.voltage_violations), "diverged": self.diverged,
                "queries": self.queries, "ms": self.ms, "line_flow_p": arr(self.line_flow_p)}


@dataclass
class EpisodeRecord:
    """Per-step log of one episode plus the summary the reports aggregate."""

    attack: str
    seed: int
    steps: list = field(default_factory=list)
    target_line: int | None = None
    target_rating: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def total_reward(self) -> float:
        return float(math.fsum(st.reward for st in self.steps))

    @property
    def survival_steps(self) -> int:
        """Steps completed before a terminal failure (all steps if none occurred)."""
        return sum(1 for st in self.steps if not st.diverged)

    @property
    def max_margin(self) -> float:
        """Largest ``|P_flow| - rating`` on the targeted line; positive means overloaded."""
        if self.target_line is None:
            return float("nan")
        vals = [abs(st.line_flow_p[self.target_line]) - self.target_rating for st in self.steps
                if st.line_flow_p is not None and np.all(np.isfinite(st.line_flow_p))]
        return float(max(vals)) if vals else float("nan")

    @property
    def overload_steps(self) -> int:
        """Steps on which the targeted line carried more active power than its rating."""
        if self.target_line is None:
            return 0
        return sum(1 for st in self.steps if st.line_flow_p is not None
                   and abs(st.line_flow_p[self.target_line]) > self.target_rating)

    @property
    def queries(self) -> int:
        return sum(st.queries for st in self.steps)

    @property
    def ms_per_step(self) -> float:
        return float(np.mean([st.ms for st in self.steps])) if self.steps else 0.0

    def summary(self) -> dict:
        return {"attack": self.attack, "seed": self.seed, "total_reward": self.total_reward,
                "survival_steps": self.survival_steps, "max_margin": self.max_margin,
                "overload_steps": self.overload_steps, "queries": self.queries, "ms_per_step": self.ms_per_step}

    def to_dict(self) -> dict:
        return {**self.summary(), **self.meta, "target_line": self.target_line,
                "target_rating": self.target_rating, "steps": [st.to_dict() for st in self.steps]}


def attack_episode(env, policy, cfg: AttackConfig, attacker: str = "none",
                   target: ManipulationTarget | None = None, seed: int = 0, rng=None,
                   target_line: int | None = None) -> EpisodeRecord:
    """Play one episode; the attacker perturbs only what the policy sees.

    Each step reads the true state, builds ``s_adv`` (unchanged for
    ``none``), asks the policy for an action on ``s_adv`` and steps the
    environment from its true state with that action. Manipulation probes a
    copy of the environment so the real one is never touched. ``rng`` seeds
    the random baseline. ``target_line`` (defaulting to the manipulation
    target's line) selects the line whose margin is summarized.
    """
    if attacker not in ATTACK_KINDS:
        raise ValueError(f"attacker must be one of {ATTACK_KINDS}")
    if attacker == "manipulation":
        if target is None:
            raise ValueError("manipulation needs a target")
        target.check(env.case)
        cfg = AttackConfig(**{**cfg.to_dict(), "objective": "manipulation"})
    elif attacker == "distortion" and cfg.objective != "distortion":
        cfg = AttackConfig(**{**cfg.to_dict(), "objective": "distortion"})
    if target_line is None and target is not None and target.kind == "line-active-flow":
        target_line = target.element
    rng = np.random.default_rng(rng)
    rec = EpisodeRecord(attacker, seed, target_line=target_line,
                        target_rating=None if target_line is None else float(env.case.lines[target_line].rating))
    s = env.reset(seed)
    done = False
    while not done:
        t = env.t
        t0 = time.perf_counter()
        queries = 0
        if attacker == "none":
            s_adv = s
        elif attacker == "random":
            s_adv = random_perturbation(s, cfg, rng)
        else:
            shadow = env.copy() if attacker == "manipulation" else None
            s_adv, trace = craft_perturbation(policy, shadow, s, cfg, target)
            queries = trace.total_queries
        ms = (time.perf_counter() - t0) * 1e3
        action = policy.query(s_adv)
        s_next, reward, done, info = env.step(action)
        vio = info.get("violations")
        sol = info.get("solution")
        flows = info.get("line_flow_p")
        if flows is None and sol is not None:
            flows = sol.line_flow_p
        rec.steps.append(StepRecord(
            t=t, s_clean=np.array(s, float), s_adv=np.array(s_adv, float),
            action=int(action) if env.kind == "discrete" else np.array(info.get("action", action), float),
            reward=float(reward),
            line_overloads=np.zeros(env.case.n_line) if vio is None else vio.line_overloads.copy(),
            voltage_violations=np.zeros(env.case.n_bus) if vio is None else vio.voltage_violations.copy(),
            diverged=bool(info.get("diverged", False)), queries=queries, ms=ms,
            line_flow_p=None if flows is None else np.array(flows, float)))
        s = s_next
    return rec
