"""Query interface shared by every controller, plus checkpoint files."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, ParseError
from .nn import DuelingQNet, Mlp

CHECKPOINT_VERSION = 1


class Policy:
    """Deterministic evaluation-mode controller. Attackers only see ``query``."""

    kind = "continuous"
    version = CHECKPOINT_VERSION

    def __init__(self, state_dim: int, action_dim: int):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.history: list[float] = []

    @property
    def metadata(self) -> dict:
        return {"kind": self.kind, "state_dim": self.state_dim, "action_dim": self.action_dim,
                "version": self.version}

    def _check(self, s) -> np.ndarray:
        s = np.asarray(s, float)
        if s.shape[-1:] != (self.state_dim,):
            raise DimensionMismatch(f"state has shape {s.shape}, policy expects (..., {self.state_dim})")
        return s

    def query(self, s):
        return self.query_batch(self._check(s)[None, :])[0]

    def query_batch(self, states) -> np.ndarray:
        raise NotImplementedError


class GaussianPolicy(Policy):
    """Mean action of a tanh-squashed Gaussian actor, scaled into the device box."""

    kind = "continuous"

    def __init__(self, actor: Mlp, action_low, action_high, log_std=None):
        super().__init__(actor.sizes[0], actor.sizes[-1])
        self.actor = actor
        self.action_low = np.asarray(action_low, float)
        self.action_high = np.asarray(action_high, float)
        self.log_std = np.zeros(self.action_dim) if log_std is None else np.asarray(log_std, float)

    def _scale(self, u):
        return self.action_low + 0.5 * (u + 1.0) * (self.action_high - self.action_low)

    def query_batch(self, states) -> np.ndarray:
        u = np.tanh(self.actor(self._check(states)))
        return np.clip(self._scale(u), self.action_low, self.action_high)

    def input_gradient(self, s, direction) -> np.ndarray:
        """Analytic ``d/ds <direction, query(s)>`` (white-box reference, not used by attacks)."""
        out, acts = self.actor.forward(self._check(s))
        u = np.tanh(out)
        dout = np.asarray(direction, float) * 0.5 * (self.action_high - self.action_low) * (1.0 - u ** 2)
        return self.actor.backward(acts, dout)[1]


class QPolicy(Policy):
    """Greedy policy over a dueling Q-network; ties go to the lowest index."""

    kind = "discrete"

    def __init__(self, net: DuelingQNet):
        super().__init__(net.trunk.sizes[0], net.n_actions)
        self.net = net

    def q_values(self, s) -> np.ndarray:
        return self.net(self._check(s))

    def q_values_batch(self, states) -> np.ndarray:
        return self.net(self._check(states))

    def state_value(self, s) -> float:
        return float(self.net.state_value(self._check(s)))

    def query_batch(self, states) -> np.ndarray:
        return np.argmax(self.q_values_batch(states), axis=-1)

    def query(self, s) -> int:
        return int(np.argmax(self.q_values(s)))


def save_policy(policy: Policy, path) -> None:
    """Write a self-describing JSON checkpoint (metadata plus weight arrays)."""
    doc = {"format": "gridattack-policy", **policy.metadata}
    if isinstance(policy, GaussianPolicy):
        doc.update(arch="gaussian-mlp", layer_sizes=list(policy.actor.sizes),
                   action_low=policy.action_low.tolist(), action_high=policy.action_high.tolist(),
                   log_std=policy.log_std.tolist(), weights=[p.tolist() for p in policy.actor.params])
    elif isinstance(policy, QPolicy):
        net = policy.net
        doc.update(arch="dueling-q", layer_sizes=list(net.trunk.sizes), n_actions=net.n_actions,
                   weights=[p.tolist() for p in net.params])
    else:
        raise TypeError(f"cannot checkpoint {type(policy).__name__}")
    doc["history"] = [float(x) for x in policy.history]
    Path(path).write_text(json.dumps(doc))


def load_policy(path) -> Policy:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if doc.get("format") != "gridattack-policy":
        raise ParseError(f"{path}: not a policy checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    weights = [np.array(w, float) for w in doc["weights"]]
    if doc["arch"] == "gaussian-mlp":
        actor = Mlp(doc["layer_sizes"], 0)
        actor.set_params(weights)
        policy = GaussianPolicy(actor, doc["action_low"], doc["action_high"], doc["log_std"])
    elif doc["arch"] == "dueling-q":
        sizes = doc["layer_sizes"]
        net = DuelingQNet(sizes[0], doc["n_actions"], tuple(sizes[1:]), 0)
        net.set_params(weights)
        policy = QPolicy(net)
    else:
        raise ParseError(f"{path}: unknown arch {doc['arch']!r}")
    if policy.state_dim != doc["state_dim"] or policy.action_dim != doc["action_dim"]:
        raise ParseError(f"{path}: metadata disagrees with weight shapes")
    policy.history = list(doc.get("history", []))
    return policy
