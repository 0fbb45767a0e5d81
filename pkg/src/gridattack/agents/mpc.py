"""Receding-horizon controller on the linear (DC) network model.

Each query solves, over the next ``H`` steps, a box-constrained convex
program in the device setpoints: a resistive loss proxy on PTDF flows, a
squared-hinge penalty on apparent line loading above rating and a
squared-hinge penalty on state of charge outside ``[0, capacity]``. Only the
first step's setpoints are applied. The solver is accelerated projected
gradient (FISTA) in a diagonal metric with adaptive restart, run until the
projected-gradient (KKT) residual drops below ``tol``. Many problems that
share a network are solved together as one batch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleWindow
from ..grid.case import GridCase
from ..grid.powerflow import dc_susceptance
from ._mpc_kernel import solve_rows
from .policy import Policy

log = logging.getLogger(__name__)

PENALTY = 100.0
KKT_TOL = 1e-6


def ptdf_matrix(case: GridCase) -> np.ndarray:
    """Line flow per unit injection at each bus, withdrawn at the slack; shape (L, N)."""
    n, slack = case.n_bus, case.slack
    keep = np.arange(n) != slack
    bmat = dc_susceptance(case)
    x_inv = np.zeros((n, n))
    x_inv[np.ix_(keep, keep)] = np.linalg.inv(bmat[np.ix_(keep, keep)])
    f, t = case.line_ends()
    x = np.array([ln.x for ln in case.lines])
    ptdf = (x_inv[f] - x_inv[t]) / x[:, None]
    return ptdf * case.line_status()[:, None]


def kkt_residual(u, grad, lo, hi) -> np.ndarray:
    """``max |u - clip(u - grad)|`` per batch row; zero exactly at a box-constrained stationary point."""
    axes = tuple(range(1, u.ndim))
    return np.max(np.abs(u - np.clip(u - grad, lo, hi)), axis=axes)


def fista_box(fun_grad, lo, hi, u0, metric, tol=KKT_TOL, max_iter=50_000):
    """Minimize a batch of smooth convex functions over boxes.

    ``fun_grad(u)`` returns per-row objective values and gradients for ``u``
    of shape (B, ...). ``metric`` is a positive diagonal (broadcastable to
    ``u``) that dominates the Hessian everywhere, so ``1/metric`` is always
    a safe step. Each row starts with a much longer step ``1/(c * metric)``
    and doubles ``c`` whenever the quadratic upper bound fails, which keeps
    iterations cheap while the penalty terms are inactive. Rows stop moving
    once their KKT residual is below ``tol``. Returns ``(u, residual, iterations)``.
    """
    u = np.clip(u0, lo, hi)
    axes = tuple(range(1, u.ndim))
    shape = (-1,) + (1,) * (u.ndim - 1)
    f_u, g_u = fun_grad(u)
    res = kkt_residual(u, g_u, lo, hi)
    y, f_y, g_y = u, f_u, g_u
    theta = np.ones(len(u))
    c = np.full(len(u), 1e-3)
    it = 0
    while it < max_iter:
        active = res >= tol
        if not active.any():
            break
        it += 1
        while True:
            step = 1.0 / (c.reshape(shape) * metric)
            u_new = np.clip(y - g_y * step, lo, hi)
            f_new, g_new = fun_grad(u_new)
            d = u_new - y
            bound = f_y + np.sum(g_y * d, axis=axes) + 0.5 * c * np.sum(metric * d * d, axis=axes)
            bad = active & (f_new > bound + 1e-12 * (1.0 + np.abs(f_y))) & (c < 1.0)
            if not bad.any():
                break
            c = np.where(bad, np.minimum(2.0 * c, 1.0), c)
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta ** 2))
        # restart momentum where the step points against the last move
        restart = np.sum((y - u_new) * (u_new - u), axis=axes) > 0
        momentum = np.where(restart, 0.0, (theta - 1.0) / theta_new).reshape(shape)
        y_new = np.clip(u_new + momentum * (u_new - u), lo, hi)
        theta = np.where(restart, 1.0, theta_new)
        mask = active.reshape(shape)
        u = np.where(mask, u_new, u)
        res = np.where(active, kkt_residual(u_new, g_new, lo, hi), res)
        y = np.where(mask, y_new, y)
        f_y, g_y = fun_grad(y)
    return u, res, it


@dataclass
class ForecastWindow:
    """Exogenous inputs over the planning horizon, one row per step.

    ``avail`` is the upper bound on each controllable generator's active
    power (renewable availability or device limit).
    """

    load_p: np.ndarray
    load_q: np.ndarray
    avail: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.load_p)


class MpcController:
    """Batched receding-horizon planner for the voltage-regulation action layout.

    Actions follow the environment order: ``(P, Q)`` of each non-slack
    generator, then the power of each storage unit (positive discharges).
    """

    def __init__(self, case: GridCase, load_buses, horizon: int = 4, dt_hours: float = 0.25,
                 penalty: float = PENALTY, tol: float = KKT_TOL, max_iter: int = 50_000):
        self.case = case
        self.horizon = horizon
        self.dt = dt_hours
        self.penalty = penalty
        self.tol = tol
        self.max_iter = max_iter
        slack = case.slack
        self.gens = [g for g in case.generators if case.bus_index(g.bus) != slack]
        self.storage = list(case.storage)
        n_g, n_s = len(self.gens), len(self.storage)
        self.m = 2 * n_g + n_s
        n = case.n_bus

        ptdf = ptdf_matrix(case)
        a_p, a_q = np.zeros((n, self.m)), np.zeros((n, self.m))
        for k, g in enumerate(self.gens):
            a_p[case.bus_index(g.bus), 2 * k] += 1.0
            a_q[case.bus_index(g.bus), 2 * k + 1] += 1.0
        for k, s in enumerate(self.storage):
            a_p[case.bus_index(s.bus), 2 * n_g + k] += 1.0
        self.g_p = ptdf @ a_p
        self.g_q = ptdf @ a_q
        self.load_ptdf = ptdf[:, [case.bus_index(b) for b in load_buses]]
        self.r = np.array([ln.r for ln in case.lines]) * case.line_status()
        self.rating = case.ratings()
        self.cost = np.zeros(self.m)
        self.cost[0:2 * n_g:2] = [g.cost_coeff for g in self.gens]
        self.capacity = np.array([s.capacity for s in self.storage], float)
        self.box_lo = np.r_[np.ravel([[g.p_min, g.q_min] for g in self.gens]), [-s.p_charge_max for s in self.storage]]
        self.box_hi = np.r_[np.ravel([[g.p_max, g.q_max] for g in self.gens]), [s.p_charge_max for s in self.storage]]
        self._metric = self._hessian_bound()

    def _hessian_bound(self) -> np.ndarray:
        """Row-sum (Gershgorin) diagonal dominating the objective Hessian over the whole horizon."""
        H, m, w = self.horizon, self.m, self.penalty
        step = 2.0 * (self.g_p.T @ ((self.r + w)[:, None] * self.g_p)
                      + self.g_q.T @ ((self.r + w)[:, None] * self.g_q)) + 2.0 * np.diag(self.cost)
        full = np.kron(np.eye(H), step)
        n_g = len(self.gens)
        for k in range(len(self.storage)):
            # soc_j depends on storage power at steps 0..j-1
            idx = np.arange(H) * m + 2 * n_g + k
            cum = np.tril(np.ones((H, H)))
            full[np.ix_(idx, idx)] += 2.0 * w * self.dt ** 2 * (cum.T @ cum)
        metric = np.sum(np.abs(full), axis=1)
        return np.maximum(metric, 1e-12).reshape(H, m)

    def bounds(self, avail, soc0):
        """Per-row boxes, shape (B, H, m). Step 0 storage is also capped by the known SoC."""
        B, H = avail.shape[0], self.horizon
        n_g = len(self.gens)
        lo = np.broadcast_to(self.box_lo, (B, H, self.m)).copy()
        hi = np.broadcast_to(self.box_hi, (B, H, self.m)).copy()
        hi[:, :, 0:2 * n_g:2] = np.minimum(hi[:, :, 0:2 * n_g:2], avail)
        if self.storage:
            eff = np.array([s.efficiency for s in self.storage])
            hi[:, 0, 2 * n_g:] = np.minimum(hi[:, 0, 2 * n_g:], soc0 * eff / self.dt)
            lo[:, 0, 2 * n_g:] = np.maximum(lo[:, 0, 2 * n_g:], -(self.capacity - soc0) / (eff * self.dt))
        if np.any(lo > hi + 1e-12):
            raise InfeasibleWindow("a device box is empty (lower bound above upper bound)")
        return lo, np.maximum(hi, lo)

    def objective(self, u, load_p, load_q, soc0):
        """Objective values and gradients for a batch of plans ``u`` of shape (B, H, m)."""
        w, n_g = self.penalty, len(self.gens)
        fp = u @ self.g_p.T - load_p @ self.load_ptdf.T
        fq = u @ self.g_q.T - load_q @ self.load_ptdf.T
        s = np.sqrt(fp ** 2 + fq ** 2)
        over = np.maximum(s - self.rating, 0.0)
        val = np.sum(self.r * (fp ** 2 + fq ** 2) + w * over ** 2, axis=(1, 2))
        scale = np.divide(2.0 * w * over, s, out=np.zeros_like(s), where=s > 0)
        d_fp = 2.0 * self.r * fp + scale * fp
        d_fq = 2.0 * self.r * fq + scale * fq
        grad = d_fp @ self.g_p + d_fq @ self.g_q
        val += np.sum(self.cost * u ** 2, axis=(1, 2))
        grad += 2.0 * self.cost * u
        if self.storage:
            p = u[:, :, 2 * n_g:]
            soc = soc0[:, None, :] - self.dt * np.cumsum(p, axis=1)
            low = np.maximum(-soc, 0.0)
            high = np.maximum(soc - self.capacity, 0.0)
            val += w * np.sum(low ** 2 + high ** 2, axis=(1, 2))
            d_soc = 2.0 * w * (high - low)
            # d soc_j / d p_k = -dt for k <= j
            grad[:, :, 2 * n_g:] += -self.dt * np.cumsum(d_soc[:, ::-1], axis=1)[:, ::-1]
        return val, grad

    def plan(self, load_p, load_q, avail, soc0, u0=None, compiled: bool = True):
        """Solve a batch of windows. Inputs have a leading batch axis; returns plans (B, H, m).

        ``compiled=False`` runs the vectorized numpy solver instead of the
        compiled per-row kernel; both implement the same iteration.
        """
        load_p, load_q, avail = (np.asarray(x, float) for x in (load_p, load_q, avail))
        soc0 = np.asarray(soc0, float).reshape(len(load_p), len(self.storage))
        lo, hi = self.bounds(avail, soc0)
        u0 = np.zeros_like(lo) if u0 is None else np.array(np.broadcast_to(u0, lo.shape), float)
        if compiled:
            fp0 = -load_p @ self.load_ptdf.T
            fq0 = -load_q @ self.load_ptdf.T
            u, res, its = solve_rows(u0, lo, hi, fp0, fq0, soc0, self.g_p, self.g_q, self.r, self.rating,
                                     self.cost, self.capacity, self.dt, self.penalty, len(self.gens),
                                     self._metric, self.tol, self.max_iter)
            it = int(its.max())
        else:
            u, res, it = fista_box(lambda v: self.objective(v, load_p, load_q, soc0), lo, hi, u0,
                                   self._metric, self.tol, self.max_iter)
        if np.any(res >= self.tol):
            log.warning("MPC stopped after %d iterations with KKT residual %.2e", it, res.max())
        self.last_residual, self.last_iterations = res, it
        return u

    def act(self, window: ForecastWindow, soc0) -> np.ndarray:
        if window.horizon != self.horizon:
            raise ValueError(f"window has {window.horizon} steps, controller plans {self.horizon}")
        u = self.plan(window.load_p[None], window.load_q[None], window.avail[None], np.atleast_1d(soc0)[None])
        return u[0, 0]


def mpc_act(case: GridCase, window: ForecastWindow, soc0, load_buses, horizon: int | None = None,
            **kwargs) -> np.ndarray:
    """First-step setpoints of the receding-horizon plan for one window."""
    ctrl = MpcController(case, load_buses, horizon=horizon or window.horizon, **kwargs)
    return ctrl.act(window, soc0)


class MpcPolicy(Policy):
    """Query interface around :class:`MpcController` bound to a voltage environment.

    The plan always takes the state of charge from the (possibly perturbed)
    observation. With ``measured="soc"`` (default) loads and renewable
    availability come from the forecast window for every step, including the
    current one. With ``measured="all"`` the current step's loads and
    availability are read from the observation too.
    """

    kind = "continuous"

    def __init__(self, env, horizon: int = 16, measured: str = "soc", **kwargs):
        super().__init__(env.state_dim, env.action_dim)
        if measured not in ("soc", "all"):
            raise ValueError("measured must be 'soc' or 'all'")
        self.env = env
        self.measured = measured
        self.ctrl = MpcController(env.case, env.profile.load_buses, horizon=horizon, dt_hours=env.dt, **kwargs)
        lay = env.layout
        self._lp = [lay.index(f"load_p_{b}") for b in env.profile.load_buses]
        self._lq = [lay.index(f"load_q_{b}") for b in env.profile.load_buses]
        self._soc = [lay.index(f"soc_{s.bus}") for s in env.storage]
        self._renew = {k: lay.index(f"renew_p_{g.bus}") for k, g in enumerate(env.gens)
                       if f"renew_p_{g.bus}" in lay.names}
        self.action_low, self.action_high = env.action_low, env.action_high

    def forecast(self):
        """Forecast window from the bound environment, starting at its current step."""
        env, H = self.env, self.ctrl.horizon
        rows = [env.exogenous(env.t + k) for k in range(H)]
        load_p = np.array([r[0] for r in rows])
        load_q = np.array([r[1] for r in rows])
        avail = np.array([env.availability(env.t + k) for k in range(H)])
        return ForecastWindow(load_p, load_q, avail)

    def query_batch(self, states) -> np.ndarray:
        states = self._check(states)
        raw = self.env.layout.denormalize(states)
        # solve each distinct set of used features once
        cols = self._soc if self.measured == "soc" else self._lp + self._lq + list(self._renew.values()) + self._soc
        used = raw[:, cols]
        _, first, inverse = np.unique(used, axis=0, return_index=True, return_inverse=True)
        if len(first) < len(raw):
            return self.query_batch(states[first])[inverse.ravel()]
        B = len(raw)
        win = self.forecast()
        load_p = np.repeat(win.load_p[None], B, axis=0)
        load_q = np.repeat(win.load_q[None], B, axis=0)
        avail = np.repeat(win.avail[None], B, axis=0)
        if self.measured == "all":
            load_p[:, 0] = raw[:, self._lp]
            load_q[:, 0] = raw[:, self._lq]
            cap = np.array([g.p_max for g in self.env.gens], float)
            for k, col in self._renew.items():
                avail[:, 0, k] = np.minimum(cap[k], raw[:, col])
        u = self.ctrl.plan(load_p, load_q, avail, raw[:, self._soc])
        return np.clip(u[:, 0], self.action_low, self.action_high)
