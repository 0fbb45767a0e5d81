"""Compiled per-row FISTA for the MPC program.

Same objective, metric and step rule as ``MpcController.objective`` plus
``fista_box``, written as scalar loops so numba can compile them. Attack
probes call the controller thousands of times per episode; at these problem
sizes interpreter overhead, not arithmetic, dominates the numpy path.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _objective(u, fp0, fq0, soc0, g_p, g_q, r, rating, cost, cap, dt, w, n_g, grad):
    H, m = u.shape
    L = g_p.shape[0]
    n_s = cap.shape[0]
    val = 0.0
    for k in range(H):
        for j in range(m):
            grad[k, j] = 2.0 * cost[j] * u[k, j]
            val += cost[j] * u[k, j] * u[k, j]
        for l in range(L):
            fp = fp0[k, l]
            fq = fq0[k, l]
            for j in range(m):
                fp += g_p[l, j] * u[k, j]
                fq += g_q[l, j] * u[k, j]
            s2 = fp * fp + fq * fq
            s = np.sqrt(s2)
            over = s - rating[l]
            d = 2.0 * r[l]
            val += r[l] * s2
            if over > 0.0:
                val += w * over * over
                d += 2.0 * w * over / s
            dp = d * fp
            dq = d * fq
            for j in range(m):
                grad[k, j] += dp * g_p[l, j] + dq * g_q[l, j]
    for i in range(n_s):
        col = 2 * n_g + i
        soc = soc0[i]
        tail = 0.0
        d_soc = np.empty(H)
        for k in range(H):
            soc -= dt * u[k, col]
            lo = -soc if soc < 0.0 else 0.0
            hi = soc - cap[i] if soc > cap[i] else 0.0
            val += w * (lo * lo + hi * hi)
            d_soc[k] = 2.0 * w * (hi - lo)
        for k in range(H - 1, -1, -1):
            tail += d_soc[k]
            grad[k, col] -= dt * tail
    return val


@njit(cache=True)
def _residual(u, g, lo, hi):
    res = 0.0
    H, m = u.shape
    for k in range(H):
        for j in range(m):
            p = min(max(u[k, j] - g[k, j], lo[k, j]), hi[k, j])
            res = max(res, abs(u[k, j] - p))
    return res


@njit(cache=True)
def solve_rows(u0, lo, hi, fp0, fq0, soc0, g_p, g_q, r, rating, cost, cap, dt, w, n_g, metric, tol, max_iter):
    """Returns ``(u, residual, iterations)`` with one entry per row."""
    B, H, m = u0.shape
    out = np.empty_like(u0)
    res_out = np.empty(B)
    it_out = np.zeros(B, dtype=np.int64)
    g_u = np.empty((H, m))
    g_y = np.empty((H, m))
    g_new = np.empty((H, m))
    u_new = np.empty((H, m))
    for b in range(B):
        u = np.minimum(np.maximum(u0[b], lo[b]), hi[b])
        _objective(u, fp0[b], fq0[b], soc0[b], g_p, g_q, r, rating, cost, cap, dt, w, n_g, g_u)
        res = _residual(u, g_u, lo[b], hi[b])
        y = u.copy()
        f_y = _objective(y, fp0[b], fq0[b], soc0[b], g_p, g_q, r, rating, cost, cap, dt, w, n_g, g_y)
        theta = 1.0
        c = 1e-3
        it = 0
        while res >= tol and it < max_iter:
            it += 1
            while True:
                lin = 0.0
                quad = 0.0
                for k in range(H):
                    for j in range(m):
                        v = y[k, j] - g_y[k, j] / (c * metric[k, j])
                        v = min(max(v, lo[b, k, j]), hi[b, k, j])
                        u_new[k, j] = v
                        d = v - y[k, j]
                        lin += g_y[k, j] * d
                        quad += metric[k, j] * d * d
                f_new = _objective(u_new, fp0[b], fq0[b], soc0[b], g_p, g_q, r, rating, cost, cap, dt, w, n_g,
                                   g_new)
                if c >= 1.0 or f_new <= f_y + lin + 0.5 * c * quad + 1e-12 * (1.0 + abs(f_y)):
                    break
                c = min(2.0 * c, 1.0)
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            dot = 0.0
            for k in range(H):
                for j in range(m):
                    dot += (y[k, j] - u_new[k, j]) * (u_new[k, j] - u[k, j])
            mom = 0.0 if dot > 0.0 else (theta - 1.0) / theta_new
            theta = 1.0 if dot > 0.0 else theta_new
            for k in range(H):
                for j in range(m):
                    v = u_new[k, j] + mom * (u_new[k, j] - u[k, j])
                    y[k, j] = min(max(v, lo[b, k, j]), hi[b, k, j])
                    u[k, j] = u_new[k, j]
            res = _residual(u, g_new, lo[b], hi[b])
            f_y = _objective(y, fp0[b], fq0[b], soc0[b], g_p, g_q, r, rating, cost, cap, dt, w, n_g, g_y)
        out[b] = u
        res_out[b] = res
        it_out[b] = it
    return out, res_out, it_out
