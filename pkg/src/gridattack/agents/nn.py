"""Small numpy multilayer perceptrons with hand-written backprop and Adam."""
from __future__ import annotations

import numpy as np


class Mlp:
    """Fully connected net with tanh hidden layers and a linear output layer.

    ``final_tanh=True`` applies tanh to the output too (used for trunks).
    Parameters live in ``self.params`` as ``[W0, b0, W1, b1, ...]`` with
    ``W`` shaped ``(fan_in, fan_out)``.
    """

    def __init__(self, sizes, rng=None, out_scale: float = 1.0, final_tanh: bool = False):
        rng = np.random.default_rng(rng)
        self.sizes = tuple(int(s) for s in sizes)
        self.final_tanh = final_tanh
        self.params = []
        n_layers = len(self.sizes) - 1
        for k, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-lim, lim, (fan_in, fan_out))
            if k == n_layers - 1:
                w *= out_scale
            self.params += [w, np.zeros(fan_out)]

    def forward(self, x):
        """Returns ``(output, cache)``; ``x`` may be one vector or a batch."""
        h = np.asarray(x, float)
        acts = [h]
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            h = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < n_layers - 1 or self.final_tanh:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, acts, dout):
        """Gradients of a scalar loss w.r.t. params and input given ``dL/doutput``."""
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        d = np.asarray(dout, float)
        for k in reversed(range(n_layers)):
            if k < n_layers - 1 or self.final_tanh:
                d = d * (1.0 - acts[k + 1] ** 2)
            a_in = acts[k]
            if a_in.ndim == 1:
                grads[2 * k] = np.outer(a_in, d)
                grads[2 * k + 1] = d.copy()
            else:
                grads[2 * k] = a_in.T @ d
                grads[2 * k + 1] = d.sum(axis=0)
            d = d @ self.params[2 * k].T
        return grads, d

    def set_params(self, params):
        self.params = [np.array(p, float) for p in params]

    def copy(self) -> Mlp:
        other = object.__new__(Mlp)
        other.sizes = self.sizes
        other.final_tanh = self.final_tanh
        other.params = [p.copy() for p in self.params]
        return other


class DuelingQNet:
    """Tanh trunk feeding a state-value head and an advantage head.

    Q = V + A - mean(A), so the mean of (Q - V) over actions is zero.
    """

    def __init__(self, state_dim, n_actions, hidden=(64, 64), rng=None):
        rng = np.random.default_rng(rng)
        self.trunk = Mlp((state_dim, *hidden), rng, final_tanh=True)
        self.value = Mlp((hidden[-1], 1), rng, out_scale=0.1)
        self.adv = Mlp((hidden[-1], n_actions), rng, out_scale=0.1)
        self.n_actions = n_actions

    @property
    def params(self):
        return self.trunk.params + self.value.params + self.adv.params

    def set_params(self, params):
        n_t = len(self.trunk.params)
        self.trunk.set_params(params[:n_t])
        self.value.set_params(params[n_t:n_t + 2])
        self.adv.set_params(params[n_t + 2:])

    def forward(self, x):
        h, c_t = self.trunk.forward(x)
        v, c_v = self.value.forward(h)
        a, c_a = self.adv.forward(h)
        q = v + a - a.mean(axis=-1, keepdims=True)
        return q, (c_t, c_v, c_a, v)

    def __call__(self, x):
        return self.forward(x)[0]

    def state_value(self, x):
        return self.forward(x)[1][3][..., 0]

    def backward(self, cache, dq):
        c_t, c_v, c_a, _ = cache
        dq = np.asarray(dq, float)
        dv = dq.sum(axis=-1, keepdims=True)
        da = dq - dq.mean(axis=-1, keepdims=True)
        g_v, dh_v = self.value.backward(c_v, dv)
        g_a, dh_a = self.adv.backward(c_a, da)
        g_t, dx = self.trunk.backward(c_t, dh_v + dh_a)
        return g_t + g_v + g_a, dx

    def copy(self) -> DuelingQNet:
        other = object.__new__(DuelingQNet)
        other.trunk, other.value, other.adv = self.trunk.copy(), self.value.copy(), self.adv.copy()
        other.n_actions = self.n_actions
        return other


def clip_by_global_norm(grads, max_norm):
    if max_norm is None:
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm:
        grads = [g * (max_norm / total) for g in grads]
    return grads


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
