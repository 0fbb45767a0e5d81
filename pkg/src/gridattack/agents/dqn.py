"""Double DQN with a dueling head, uniform replay and epsilon-greedy exploration."""
from __future__ import annotations

import numpy as np

from ..errors import KindMismatch, NonFiniteLoss
from .config import TrainConfig
from .nn import Adam, DuelingQNet, clip_by_global_norm
from .policy import QPolicy
from .replay import ReplayBuffer


def epsilon_at(step: int, cfg: TrainConfig) -> float:
    span = max(1.0, cfg.eps_decay_frac * cfg.steps)
    frac = min(step / span, 1.0)
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def double_q_targets(online: DuelingQNet, target: DuelingQNet, r, s2, terminal, gamma: float) -> np.ndarray:
    """Online net picks the next action, target net scores it."""
    a_star = np.argmax(online(s2), axis=1)
    q_next = target(s2)[np.arange(len(a_star)), a_star]
    return r + gamma * np.where(terminal, 0.0, q_next)


def train_dqn(env, cfg: TrainConfig | None = None) -> QPolicy:
    """Returns the greedy policy; ``policy.history`` holds training episode returns."""
    cfg = cfg or TrainConfig()
    if env.kind != "discrete":
        raise KindMismatch("DQN needs a discrete-action environment")
    rng = np.random.default_rng([cfg.seed, 2])
    d, n_act = env.state_dim, env.n_actions
    net = DuelingQNet(d, n_act, cfg.hidden, rng)
    target = net.copy()
    opt = Adam(net.params, cfg.lr)
    buf = ReplayBuffer(cfg.buffer_capacity, d)
    idx = np.arange(cfg.batch_size)
    history: list[float] = []

    s = env.reset(int(rng.integers(2 ** 31)))
    ep_ret = 0.0
    for step in range(cfg.steps):
        if rng.random() < epsilon_at(step, cfg):
            a = int(rng.integers(n_act))
        else:
            a = int(np.argmax(net(s)))
        s2, r, done, info = env.step(a)
        ep_ret += r
        buf.add(s, a, r * cfg.reward_scale, s2, done and not info.get("truncated", False))
        if done:
            history.append(ep_ret)
            ep_ret = 0.0
            s = env.reset(int(rng.integers(2 ** 31)))
        else:
            s = s2

        if step >= cfg.learning_starts and step % cfg.train_freq == 0:
            S, A, R, S2, T = buf.sample(cfg.batch_size, rng)
            y = double_q_targets(net, target, R, S2, T, cfg.gamma)
            q, cache = net.forward(S)
            td = q[idx, A] - y
            loss = float(np.mean(np.where(np.abs(td) <= 1.0, 0.5 * td ** 2, np.abs(td) - 0.5)))
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"step {step}: TD loss {loss}")
            dq = np.zeros_like(q)
            dq[idx, A] = np.clip(td, -1.0, 1.0) / cfg.batch_size
            grads, _ = net.backward(cache, dq)
            frac = step / cfg.steps
            opt.step(clip_by_global_norm(grads, cfg.max_grad_norm),
                     cfg.lr * (1.0 - (1.0 - cfg.lr_final_frac) * frac))
        if (step + 1) % cfg.target_sync == 0:
            target = net.copy()

    policy = QPolicy(net.copy())
    policy.history = history
    return policy
