"""Tiny environments with known optima, used to check the trainers."""
from __future__ import annotations

import copy

import numpy as np

from ..errors import EpisodeFinished, InvalidAction
from .base import StepOutcome


class BanditEnv:
    """One-step episodes: ``s ~ U[0,1]^d``, action in ``[0,1]^d``, reward ``-||a - s||^2``.

    The optimal deterministic policy is ``a = s``.
    """

    kind = "continuous"

    def __init__(self, dim: int = 2):
        self.state_dim = dim
        self.action_low = np.zeros(dim)
        self.action_high = np.ones(dim)
        self._rng = np.random.default_rng(0)
        self.s = np.zeros(dim)
        self.done = True

    def reset(self, seed: int = 0) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self.s = self._rng.random(self.state_dim)
        self.done = False
        return self.s.copy()

    def step(self, a) -> StepOutcome:
        if self.done:
            raise EpisodeFinished("episode finished; call reset()")
        a = np.clip(np.asarray(a, float), self.action_low, self.action_high)
        r = -float(np.sum((a - self.s) ** 2))
        self.done = True
        return StepOutcome(self.s.copy(), r, True, {"truncated": False})

    def copy(self) -> BanditEnv:
        return copy.deepcopy(self)


class ChainEnv:
    """Two states, two actions. Action 1 switches state; staying in state 1 pays 1.

    States are one-hot encoded. Episodes are cut after ``horizon`` steps and
    flagged as truncated, so the learning target is the infinite-horizon
    discounted value.
    """

    kind = "discrete"
    n_actions = 2
    state_dim = 2

    def __init__(self, horizon: int = 20):
        self.horizon = horizon
        self.pos = 0
        self.t = 0
        self.done = True

    @staticmethod
    def reward(s: int, a: int) -> float:
        return 1.0 if (s == 1 and a == 0) else 0.0

    @staticmethod
    def transition(s: int, a: int) -> int:
        return 1 - s if a == 1 else s

    def _obs(self) -> np.ndarray:
        return np.eye(2)[self.pos]

    def reset(self, seed: int = 0) -> np.ndarray:
        self.pos = int(np.random.default_rng(seed).integers(2))
        self.t = 0
        self.done = False
        return self._obs()

    def step(self, a) -> StepOutcome:
        if self.done:
            raise EpisodeFinished("episode finished; call reset()")
        if a not in (0, 1):
            raise InvalidAction(f"action {a!r} outside {{0, 1}}")
        r = self.reward(self.pos, int(a))
        self.pos = self.transition(self.pos, int(a))
        self.t += 1
        self.done = self.t >= self.horizon
        return StepOutcome(self._obs(), r, self.done, {"truncated": self.done})

    def copy(self) -> ChainEnv:
        return copy.deepcopy(self)


def chain_value_iteration(gamma: float, tol: float = 1e-13) -> np.ndarray:
    """Q* of :class:`ChainEnv` by value iteration, shape (2 states, 2 actions)."""
    q = np.zeros((2, 2))
    while True:
        v = q.max(axis=1)
        q_new = np.array([[ChainEnv.reward(s, a) + gamma * v[ChainEnv.transition(s, a)] for a in (0, 1)]
                          for s in (0, 1)])
        if np.max(np.abs(q_new - q)) < tol:
            return q_new
        q = q_new
