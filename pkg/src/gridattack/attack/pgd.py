"""Projected sign-gradient perturbations and the random-noise baseline."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .config import AttackConfig, ManipulationTarget
from .gradient import estimate_gradient
from .objectives import distortion_loss_batch, manipulation_loss_batch


def perturbation_norm(delta, p: float) -> float:
    delta = np.asarray(delta, float)
    if p == 0:
        return float(np.count_nonzero(delta))
    return float(np.linalg.norm(delta, ord=p))


def within_budget(s_adv, s, cfg: AttackConfig, tol: float = 1e-12) -> bool:
    """``s_adv`` lies in ``[0,1]^N`` and inside the configured budget around ``s``."""
    delta = np.asarray(s_adv, float) - np.asarray(s, float)
    if np.any(s_adv < 0.0) or np.any(s_adv > 1.0):
        return False
    if cfg.norm_p == 0:
        return np.count_nonzero(delta) <= cfg.k_sparse and np.max(np.abs(delta), initial=0.0) <= cfg.epsilon + tol
    return perturbation_norm(delta, cfg.norm_p) <= cfg.epsilon + tol


def project(s_adv, s0, cfg: AttackConfig) -> np.ndarray:
    """Clip to the epsilon-box around ``s0`` and to ``[0,1]``; then rescale onto the
    L2 ball (p=2) or keep the ``k_sparse`` largest moves (p=0)."""
    s0 = np.asarray(s0, float)
    eps = cfg.epsilon
    out = np.clip(np.clip(s_adv, s0 - eps, s0 + eps), 0.0, 1.0)
    delta = out - s0
    if cfg.norm_p == 2:
        n = np.linalg.norm(delta)
        if n > eps:
            # shrinking toward s0 stays inside [0,1]
            out = s0 + delta * (eps / n)
    elif cfg.norm_p == 0 and np.count_nonzero(delta) > cfg.k_sparse:
        keep = np.argsort(-np.abs(delta), kind="stable")[:cfg.k_sparse]
        out = s0.copy()
        out[keep] += delta[keep]
    return out


def pgd_step(s_j, g_hat, cfg: AttackConfig, s_0, maximize: bool = False) -> np.ndarray:
    """One signed step of size ``eta`` followed by projection.

    Descends for minimization and ascends when ``maximize``. With p=0 only the
    ``k_sparse`` coordinates with the largest ``|g_hat|`` move.
    """
    g = np.sign(np.asarray(g_hat, float))
    if cfg.norm_p == 0:
        mask = np.zeros_like(g)
        mask[np.argsort(-np.abs(g_hat), kind="stable")[:cfg.k_sparse]] = 1.0
        g = g * mask
    direction = 1.0 if maximize else -1.0
    return project(np.asarray(s_j, float) + direction * cfg.step_size * g, s_0, cfg)


@dataclass
class AttackTrace:
    """Per-iteration log of one crafted perturbation."""

    iters: list = field(default_factory=list)
    s_adv: np.ndarray | None = None
    delta: np.ndarray | None = None
    total_queries: int = 0
    gradient_queries: int = 0
    wall_ms: float = 0.0

    def add(self, it, objective, delta_norm, queries, ms):
        self.iters.append({"iter": int(it), "objective": float(objective), "delta_norm": float(delta_norm),
                           "queries": int(queries), "ms": float(ms)})

    def to_jsonl(self) -> str:
        return "".join(json.dumps(row) + "\n" for row in self.iters)


def make_objective(policy, s, cfg: AttackConfig, shadow_env=None, target: ManipulationTarget | None = None,
                   a_clean=None):
    """Batched objective in "bigger is better for the attacker" form plus the raw-loss sign.

    Returns ``(fn, sign, extra_queries)`` where ``raw_loss = sign * fn(states)``.
    """
    if cfg.objective == "distortion":
        extra = 0
        if a_clean is None:
            a_clean = policy.query(s)
            extra = 1
        return (lambda S: distortion_loss_batch(policy, S, a_clean)), 1.0, extra
    if target is None or shadow_env is None:
        raise ValueError("manipulation needs a shadow environment and a target")
    return (lambda S: -manipulation_loss_batch(policy, shadow_env, S, target)), -1.0, 0


def craft_perturbation(policy, env_view, s, cfg: AttackConfig, target: ManipulationTarget | None = None,
                       a_clean=None):
    """Black-box PGD on a finite-difference gradient; returns ``(s_adv, trace)``.

    Starts from ``s``, runs ``max_iters`` rounds of coordinate-wise central
    differences followed by a projected sign step, and keeps the best iterate
    seen. Each round costs ``2 * dim`` gradient queries plus one query to
    score the new iterate; scoring ``s`` itself costs one more.
    """
    t_start = time.perf_counter()
    s = np.asarray(s, float)
    trace = AttackTrace()
    if cfg.epsilon == 0:
        trace.s_adv, trace.delta = s.copy(), np.zeros_like(s)
        return s.copy(), trace
    fn, sign, queries = make_objective(policy, s, cfg, env_view, target, a_clean)
    best_s, best_val = s.copy(), float(fn(s[None])[0])
    queries += 1
    s_adv = s.copy()
    d = s.size
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        g = estimate_gradient(fn, s_adv, cfg.h, bounds=(0.0, 1.0), batched=True)
        s_adv = pgd_step(s_adv, g, cfg, s, maximize=True)
        val = float(fn(s_adv[None])[0])
        queries += 2 * d + 1
        trace.gradient_queries += 2 * d
        if val > best_val:
            best_s, best_val = s_adv.copy(), val
        trace.add(it, sign * val, perturbation_norm(s_adv - s, cfg.norm_p), 2 * d + 1,
                  (time.perf_counter() - t0) * 1e3)
    trace.total_queries = queries
    trace.s_adv, trace.delta = best_s, best_s - s
    trace.wall_ms = (time.perf_counter() - t_start) * 1e3
    return best_s, trace


def random_perturbation(s, cfg: AttackConfig, rng) -> np.ndarray:
    """Noise of norm ``epsilon`` in a uniformly random direction, clipped into ``[0,1]``.

    L-inf: one random coordinate sits at ``+-epsilon``, the rest are uniform in
    the box. L2: a normalized Gaussian direction. L0: ``k_sparse`` random
    coordinates moved by ``+-epsilon``.
    """
    rng = np.random.default_rng(rng)
    s = np.asarray(s, float)
    d, eps = s.size, cfg.epsilon
    if cfg.norm_p == 2:
        z = rng.standard_normal(d)
        delta = eps * z / max(np.linalg.norm(z), 1e-300)
    elif cfg.norm_p == 0:
        delta = np.zeros(d)
        idx = rng.choice(d, size=min(cfg.k_sparse, d), replace=False)
        delta[idx] = eps * rng.choice([-1.0, 1.0], size=len(idx))
    else:
        delta = eps * rng.uniform(-1.0, 1.0, d)
        delta[rng.integers(d)] = eps * rng.choice([-1.0, 1.0])
    return np.clip(s + delta, 0.0, 1.0)
