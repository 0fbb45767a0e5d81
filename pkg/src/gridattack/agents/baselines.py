"""Reference controllers that ignore the observation."""
from __future__ import annotations

import numpy as np

from .policy import Policy


class ConstantPolicy(Policy):
    """Always returns the same action; ``action=0`` on a discrete task is the no-op."""

    def __init__(self, env, action=None):
        super().__init__(env.state_dim, env.n_actions if env.kind == "discrete" else env.action_dim)
        self.kind = env.kind
        if self.kind == "discrete":
            self.action = 0 if action is None else int(action)
        else:
            default = np.clip(0.0, env.action_low, env.action_high)
            self.action = default if action is None else np.asarray(action, float)

    def query_batch(self, states) -> np.ndarray:
        n = len(self._check(states))
        if self.kind == "discrete":
            return np.full(n, self.action, dtype=int)
        return np.repeat(self.action[None], n, axis=0)

    def query(self, s):
        self._check(s)
        return self.action if self.kind == "discrete" else self.action.copy()


class RandomPolicy(Policy):
    """Uniformly random action from the task's action set, independent of the state."""

    def __init__(self, env, seed=0):
        discrete = env.kind == "discrete"
        super().__init__(env.state_dim, env.n_actions if discrete else env.action_dim)
        self.kind = env.kind
        self.rng = np.random.default_rng(seed)
        if not discrete:
            self.low, self.high = env.action_low, env.action_high

    def query_batch(self, states) -> np.ndarray:
        n = len(self._check(states))
        if self.kind == "discrete":
            return self.rng.integers(self.action_dim, size=n)
        return self.rng.uniform(self.low, self.high, (n, self.action_dim))

    def query(self, s):
        a = self.query_batch(self._check(s)[None, :])[0]
        return int(a) if self.kind == "discrete" else a
