"""Attacker objectives, evaluated through policy queries only."""
from __future__ import annotations

import numpy as np

from ..errors import KindMismatch
from .config import ManipulationTarget

DIVERGED_DISTANCE = -1e3  # most adverse value: a collapsed grid is past any target


def _softmax_ce(q, label) -> np.ndarray:
    q = np.atleast_2d(q)
    z = q - q.max(axis=1, keepdims=True)
    return np.log(np.exp(z).sum(axis=1)) - z[:, label]


def distortion_loss_batch(policy, states, a_clean) -> np.ndarray:
    """Per-row action distortion. The attacker maximizes this."""
    if policy.kind == "continuous":
        a_clean = np.asarray(a_clean, float)
        return np.linalg.norm(policy.query_batch(states) - a_clean, axis=-1)
    if policy.kind == "discrete":
        return _softmax_ce(policy.q_values_batch(states), int(a_clean))
    raise KindMismatch(f"unknown policy kind {policy.kind!r}")


def distortion_loss(policy, s_adv, a_clean) -> float:
    """Continuous: ``||pi(s_adv) - a_clean||_2``. Discrete: cross-entropy of
    ``softmax(Q(s_adv))`` (temperature 1) against the one-hot clean action."""
    if policy.kind not in ("continuous", "discrete"):
        raise KindMismatch(f"unknown policy kind {policy.kind!r}")
    if policy.kind == "discrete" and np.ndim(a_clean) != 0:
        raise KindMismatch("discrete distortion needs an integer clean action")
    return float(distortion_loss_batch(policy, np.asarray(s_adv, float)[None], a_clean)[0])


def manipulation_loss_batch(policy, shadow_env, states, target: ManipulationTarget) -> np.ndarray:
    """Per-row distance to the target after one simulated step. The attacker minimizes this."""
    if policy.kind != "continuous" or not hasattr(shadow_env, "simulate"):
        raise KindMismatch("manipulation needs a continuous policy and an environment with simulate()")
    actions = policy.query_batch(states)
    if hasattr(shadow_env, "simulate_batch"):
        sols = [row[0] for row in shadow_env.simulate_batch(actions)]
    else:
        sols = [shadow_env.simulate(a)[0] for a in actions]
    return np.array([target.distance(shadow_env.case, sol) if sol.converged else DIVERGED_DISTANCE
                     for sol in sols])


def manipulation_loss(policy, shadow_env, s_adv, target: ManipulationTarget) -> float:
    """Distance of the targeted element from its target one step after acting on ``s_adv``.

    For a line target this is ``rating - |P_flow|``: positive while the line
    has headroom, negative once it is overloaded.
    """
    return float(manipulation_loss_batch(policy, shadow_env, np.asarray(s_adv, float)[None], target)[0])
