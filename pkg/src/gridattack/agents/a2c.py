"""Synchronous n-step advantage actor-critic for continuous actions."""
from __future__ import annotations

import logging

import numpy as np

from ..errors import KindMismatch, NonFiniteLoss
from .config import TrainConfig
from .nn import Adam, Mlp, clip_by_global_norm
from .policy import GaussianPolicy

log = logging.getLogger(__name__)

LOG_STD_MIN, LOG_STD_MAX = -3.0, 0.5


def train_a2c(env, cfg: TrainConfig | None = None) -> GaussianPolicy:
    """Train on ``cfg.n_envs`` copies of ``env`` stepped in lockstep.

    The actor outputs the pre-tanh mean of a Gaussian in the unit action box;
    exploration noise uses a learned, state-independent log-std. Returns the
    deterministic mean-action policy; ``policy.history`` holds the return of
    every finished training episode in completion order.
    """
    cfg = cfg or TrainConfig()
    if env.kind != "continuous":
        raise KindMismatch("A2C needs a continuous-action environment")
    rng = np.random.default_rng([cfg.seed, 1])
    d, m = env.state_dim, len(env.action_low)
    low, high = np.asarray(env.action_low, float), np.asarray(env.action_high, float)
    actor = Mlp((d, *cfg.hidden, m), rng, out_scale=0.01)
    critic = Mlp((d, *cfg.hidden, 1), rng)
    log_std = np.full(m, cfg.log_std_init)
    opt_actor = Adam(actor.params + [log_std], cfg.lr)
    opt_critic = Adam(critic.params, cfg.lr)

    envs = [env.copy() for _ in range(cfg.n_envs)]
    next_seed = lambda: int(rng.integers(2 ** 31))
    states = np.array([e.reset(next_seed()) for e in envs])
    ep_ret = np.zeros(cfg.n_envs)
    history: list[float] = []
    n, E = cfg.n_step, cfg.n_envs
    steps_done, update = 0, 0
    n_updates = max(1, cfg.steps // (n * E))

    while steps_done < cfg.steps:
        S = np.empty((n, E, d))
        U = np.empty((n, E, m))
        R = np.empty((n, E))
        done = np.zeros((n, E), dtype=bool)
        for k in range(n):
            S[k] = states
            mu = np.tanh(actor(states))
            u = mu + np.exp(log_std) * rng.standard_normal((E, m))
            U[k] = u
            act = low + 0.5 * (np.clip(u, -1.0, 1.0) + 1.0) * (high - low)
            for i, e in enumerate(envs):
                s2, r, dn, info = e.step(act[i])
                ep_ret[i] += r
                r *= cfg.reward_scale
                if dn:
                    if info.get("truncated"):
                        r += cfg.gamma * float(critic(s2)[0])
                    history.append(float(ep_ret[i]))
                    ep_ret[i] = 0.0
                    s2 = e.reset(next_seed())
                R[k, i] = r
                done[k, i] = dn
                states[i] = s2
        steps_done += n * E

        ret = critic(states)[:, 0]
        G = np.empty((n, E))
        for k in reversed(range(n)):
            ret = R[k] + cfg.gamma * np.where(done[k], 0.0, ret)
            G[k] = ret

        B = n * E
        Sb, Ub, Gb = S.reshape(B, d), U.reshape(B, m), G.reshape(B)
        v_out, v_acts = critic.forward(Sb)
        v = v_out[:, 0]
        adv = Gb - v
        adv_n = (adv - adv.mean()) / (adv.std() + 1e-8) if B > 1 else adv

        o, a_acts = actor.forward(Sb)
        mu = np.tanh(o)
        var = np.exp(2.0 * log_std)
        z = (Ub - mu) ** 2 / var
        logp = -0.5 * z.sum(axis=1) - log_std.sum() - 0.5 * m * np.log(2 * np.pi)
        pi_loss = -np.mean(adv_n * logp) - cfg.entropy_coef * log_std.sum()
        v_loss = 0.5 * np.mean(adv ** 2)
        if not (np.isfinite(pi_loss) and np.isfinite(v_loss)):
            raise NonFiniteLoss(f"update {update}: policy loss {pi_loss}, value loss {v_loss}")

        d_mu = -(adv_n[:, None] * (Ub - mu) / var) / B
        g_actor, _ = actor.backward(a_acts, d_mu * (1.0 - mu ** 2))
        g_logstd = -np.mean(adv_n[:, None] * (z - 1.0), axis=0) - cfg.entropy_coef
        g_critic, _ = critic.backward(v_acts, (cfg.value_coef * (v - Gb) / B)[:, None])

        frac = min(update / n_updates, 1.0)
        lr = cfg.lr * (1.0 - (1.0 - cfg.lr_final_frac) * frac)
        opt_actor.step(clip_by_global_norm(g_actor + [g_logstd], cfg.max_grad_norm), lr)
        opt_critic.step(clip_by_global_norm(g_critic, cfg.max_grad_norm), lr)
        np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX, out=log_std)
        update += 1
        if update % 200 == 0 and history:
            log.debug("a2c update %d: mean return (last 20) %.3f", update, np.mean(history[-20:]))

    policy = GaussianPolicy(actor.copy(), low, high, log_std.copy())
    policy.history = history
    return policy
