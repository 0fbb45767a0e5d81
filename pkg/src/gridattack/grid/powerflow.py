"""Admittance assembly, DC and AC (Newton-Raphson) power flow, limit checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NotConverged, SingularNetwork
from .case import GridCase

NR_TOL = 1e-8
NR_MAX_ITER = 20


@dataclass
class InjectionVector:
    """Per-bus net injections in p.u., generation positive. The slack entry is ignored."""

    p: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> InjectionVector:
        return cls(np.zeros(n), np.zeros(n))


@dataclass
class PowerFlowSolution:
    v_mag: np.ndarray
    v_ang: np.ndarray
    line_flow_p: np.ndarray
    line_flow_q: np.ndarray
    losses: float
    converged: bool
    iterations: int
    mismatch: float = 0.0

    @property
    def voltage(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


@dataclass
class ViolationReport:
    line_overloads: np.ndarray
    voltage_violations: np.ndarray

    @property
    def any(self) -> bool:
        return bool((self.line_overloads > 0).any() or (self.voltage_violations > 0).any())

    @classmethod
    def empty(cls, n_line: int, n_bus: int) -> ViolationReport:
        return cls(np.zeros(n_line), np.zeros(n_bus))


def build_admittance(case: GridCase) -> np.ndarray:
    """Dense complex bus-admittance matrix; out-of-service lines are skipped."""
    n = case.n_bus
    ybus = np.zeros((n, n), dtype=complex)
    for ln in case.lines:
        if not ln.in_service:
            continue
        i, j = case.bus_index(ln.from_bus), case.bus_index(ln.to_bus)
        y = 1.0 / complex(ln.r, ln.x)
        half_b = 0.5j * ln.b_charging
        ybus[i, i] += y + half_b
        ybus[j, j] += y + half_b
        ybus[i, j] -= y
        ybus[j, i] -= y
    for i, bus in enumerate(case.buses):
        ybus[i, i] += 1j * bus.shunt_b
    return ybus


def is_connected(n_bus: int, f: np.ndarray, t: np.ndarray, status: np.ndarray) -> bool:
    parent = list(range(n_bus))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    groups = n_bus
    for a, b, on in zip(f, t, status):
        if on:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                groups -= 1
    return groups == 1


def _require_connected(case: GridCase) -> None:
    f, t = case.line_ends()
    if not is_connected(case.n_bus, f, t, case.line_status()):
        raise SingularNetwork("in-service network is disconnected")


def susceptance_matrix(n_bus, f, t, x, status) -> np.ndarray:
    """DC nodal susceptance matrix from line arrays."""
    b = np.where(status, 1.0 / np.asarray(x, float), 0.0)
    bmat = np.zeros((n_bus, n_bus))
    np.add.at(bmat, (f, f), b)
    np.add.at(bmat, (t, t), b)
    np.add.at(bmat, (f, t), -b)
    np.add.at(bmat, (t, f), -b)
    return bmat


def dc_susceptance(case: GridCase) -> np.ndarray:
    f, t = case.line_ends()
    return susceptance_matrix(case.n_bus, f, t, [ln.x for ln in case.lines], case.line_status())


def dc_power_flow(case: GridCase, inj: InjectionVector) -> PowerFlowSolution:
    """Lossless linear power flow with the slack angle pinned at zero."""
    _require_connected(case)
    n = case.n_bus
    slack = case.slack
    keep = np.arange(n) != slack
    bmat = dc_susceptance(case)
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(bmat[np.ix_(keep, keep)], np.asarray(inj.p, float)[keep])
    f, t = case.line_ends()
    x = np.array([ln.x for ln in case.lines])
    flow = np.where(case.line_status(), (theta[f] - theta[t]) / x, 0.0)
    return PowerFlowSolution(
        v_mag=np.ones(n),
        v_ang=theta,
        line_flow_p=flow,
        line_flow_q=np.zeros(case.n_line),
        losses=0.0,
        converged=True,
        iterations=0,
    )


def newton_raphson(ybus, s_spec, v0, slack, pv, pq, tol=NR_TOL, max_iter=NR_MAX_ITER):
    """Polar Newton-Raphson on the nodal mismatch.

    Returns ``(V, converged, iterations, max_mismatch)``. Never raises on
    divergence; a blow-up or a singular Jacobian is reported as not converged.
    """
    v = np.array(v0, dtype=complex)
    vm, va = np.abs(v), np.angle(v)
    pvpq = np.r_[pv, pq]
    n_a, n_m = len(pvpq), len(pq)

    def mismatch(v):
        mis = v * np.conj(ybus @ v) - s_spec
        return np.r_[mis[pvpq].real, mis[pq].imag]

    fx = mismatch(v)
    err = np.abs(fx).max(initial=0.0)
    it = 0
    while err >= tol and it < max_iter:
        it += 1
        ibus = ybus @ v
        vnorm = v / vm
        ds_dvm = v[:, None] * np.conj(ybus * vnorm[None, :]) + np.diag(np.conj(ibus) * vnorm)
        ds_dva = 1j * v[:, None] * np.conj(np.diag(ibus) - ybus * v[None, :])
        jac = np.empty((n_a + n_m, n_a + n_m))
        jac[:n_a, :n_a] = ds_dva[np.ix_(pvpq, pvpq)].real
        jac[:n_a, n_a:] = ds_dvm[np.ix_(pvpq, pq)].real
        jac[n_a:, :n_a] = ds_dva[np.ix_(pq, pvpq)].imag
        jac[n_a:, n_a:] = ds_dvm[np.ix_(pq, pq)].imag
        try:
            dx = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            return v, False, it, np.inf
        va[pvpq] += dx[:n_a]
        vm[pq] += dx[n_a:]
        if not np.all(np.isfinite(vm)) or vm.min() <= 1e-3 or vm.max() > 10.0:
            return vm * np.exp(1j * va), False, it, np.inf
        v = vm * np.exp(1j * va)
        fx = mismatch(v)
        err = np.abs(fx).max()
    return v, bool(err < tol), it, float(err)


def newton_raphson_batch(ybus, s_spec, v0, slack, pv, pq, tol=NR_TOL, max_iter=NR_MAX_ITER):
    """Row-wise :func:`newton_raphson` on a batch of injections, shape (B, n).

    Each row takes exactly the updates the single-case solver would and stops
    moving once it converges or fails. Returns ``(V, converged, iterations,
    max_mismatch)`` with a leading batch axis.
    """
    v = np.array(v0, dtype=complex)
    s_spec = np.asarray(s_spec, dtype=complex)
    B = len(v)
    vm, va = np.abs(v), np.angle(v)
    pvpq = np.r_[pv, pq]
    n_a, n_m = len(pvpq), len(pq)

    def mismatch(v, rows=slice(None)):
        mis = v * np.conj(v @ ybus.T) - s_spec[rows]
        return np.concatenate([mis[:, pvpq].real, mis[:, pq].imag], axis=1)

    fx = mismatch(v)
    err = np.abs(fx).max(axis=1, initial=0.0)
    its = np.zeros(B, dtype=int)
    failed = np.zeros(B, dtype=bool)
    active = err >= tol
    it = 0
    while active.any() and it < max_iter:
        it += 1
        rows = np.flatnonzero(active)
        vr, vmr = v[rows], vm[rows]
        ibus = vr @ ybus.T
        vnorm = vr / vmr
        ds_dvm = vr[:, :, None] * np.conj(ybus[None] * vnorm[:, None, :])
        ds_dvm[:, np.arange(len(ybus)), np.arange(len(ybus))] += np.conj(ibus) * vnorm
        ds_dva = -1j * vr[:, :, None] * np.conj(ybus[None] * vr[:, None, :])
        ds_dva[:, np.arange(len(ybus)), np.arange(len(ybus))] += 1j * vr * np.conj(ibus)
        jac = np.empty((len(rows), n_a + n_m, n_a + n_m))
        jac[:, :n_a, :n_a] = ds_dva[:, pvpq][:, :, pvpq].real
        jac[:, :n_a, n_a:] = ds_dvm[:, pvpq][:, :, pq].real
        jac[:, n_a:, :n_a] = ds_dva[:, pq][:, :, pvpq].imag
        jac[:, n_a:, n_a:] = ds_dvm[:, pq][:, :, pq].imag
        dx = np.full((len(rows), n_a + n_m), np.nan)
        try:
            dx = np.linalg.solve(jac, -fx[rows][:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            for k in range(len(rows)):
                try:
                    dx[k] = np.linalg.solve(jac[k], -fx[rows[k]])
                except np.linalg.LinAlgError:
                    pass
        its[rows] = it
        singular = ~np.all(np.isfinite(dx), axis=1)
        va_r, vm_r = va[rows], vm[rows]
        va_r[:, pvpq] += np.where(singular[:, None], 0.0, dx[:, :n_a])
        vm_r[:, pq] += np.where(singular[:, None], 0.0, dx[:, n_a:])
        blown = ~singular & (~np.all(np.isfinite(vm_r), axis=1) | (vm_r.min(axis=1) <= 1e-3)
                             | (vm_r.max(axis=1) > 10.0))
        va[rows], vm[rows] = va_r, vm_r
        v[rows] = np.where(singular[:, None], vr, vm_r * np.exp(1j * va_r))
        ok = ~(singular | blown)
        fx[rows[ok]] = mismatch(v[rows[ok]], rows[ok])
        err[rows[ok]] = np.abs(fx[rows[ok]]).max(axis=1)
        bad = rows[~ok]
        err[bad] = np.inf
        failed[bad] = True
        active = ~failed & (err >= tol)
    return v, ~failed & (err < tol), its, err


def branch_flows(case: GridCase, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sending-end active and reactive flow on every line (zero when out of service)."""
    f, t = case.line_ends()
    z = np.array([complex(ln.r, ln.x) for ln in case.lines])
    bc = np.array([ln.b_charging for ln in case.lines])
    y = 1.0 / z
    i_f = (y + 0.5j * bc) * v[f] - y * v[t]
    s_f = np.where(case.line_status(), v[f] * np.conj(i_f), 0.0)
    return s_f.real, s_f.imag


def bus_types(case: GridCase):
    slack = case.slack
    pv = np.array([i for i, b in enumerate(case.buses) if b.type == "PV"], dtype=int)
    pq = np.array([i for i, b in enumerate(case.buses) if b.type == "PQ"], dtype=int)
    return slack, pv, pq


def ac_power_flow(case: GridCase, inj: InjectionVector, v_init=None, *, ybus=None,
                  tol: float = NR_TOL, max_iter: int = NR_MAX_ITER) -> PowerFlowSolution:
    """Full AC power flow by Newton-Raphson from a flat (or warm) start.

    PV buses hold their starting magnitude (1.0 p.u. on a flat start). A
    diverged solve comes back with ``converged=False``.
    """
    _require_connected(case)
    if ybus is None:
        ybus = build_admittance(case)
    slack, pv, pq = bus_types(case)
    n = case.n_bus
    v0 = np.ones(n, dtype=complex) if v_init is None else np.array(v_init, dtype=complex)
    v0[slack] = abs(v0[slack])
    s_spec = np.asarray(inj.p, float) + 1j * np.asarray(inj.q, float)
    v, ok, it, err = newton_raphson(ybus, s_spec, v0, slack, pv, pq, tol, max_iter)
    if not ok:
        nan = np.full(case.n_line, np.nan)
        return PowerFlowSolution(np.abs(v), np.angle(v), nan, nan.copy(), np.nan, False, it, err)
    p_f, q_f = branch_flows(case, v)
    s_bus = v * np.conj(ybus @ v)
    return PowerFlowSolution(np.abs(v), np.angle(v), p_f, q_f, float(s_bus.real.sum()), True, it, err)


def ac_power_flow_batch(case: GridCase, p, q, v_init=None, *, ybus=None,
                        tol: float = NR_TOL, max_iter: int = NR_MAX_ITER) -> list[PowerFlowSolution]:
    """:func:`ac_power_flow` for each row of the injection arrays ``p`` and ``q`` (B, n)."""
    _require_connected(case)
    if ybus is None:
        ybus = build_admittance(case)
    slack, pv, pq = bus_types(case)
    p, q = np.atleast_2d(p), np.atleast_2d(q)
    B, n = p.shape
    v0 = np.ones((B, n), dtype=complex) if v_init is None else np.array(
        np.broadcast_to(v_init, (B, n)), dtype=complex)
    v0[:, slack] = np.abs(v0[:, slack])
    v, ok, its, err = newton_raphson_batch(ybus, p + 1j * q, v0, slack, pv, pq, tol, max_iter)
    out = []
    for k in range(B):
        if not ok[k]:
            nan = np.full(case.n_line, np.nan)
            out.append(PowerFlowSolution(np.abs(v[k]), np.angle(v[k]), nan, nan.copy(), np.nan, False,
                                         int(its[k]), float(err[k])))
            continue
        p_f, q_f = branch_flows(case, v[k])
        s_bus = v[k] * np.conj(ybus @ v[k])
        out.append(PowerFlowSolution(np.abs(v[k]), np.angle(v[k]), p_f, q_f, float(s_bus.real.sum()), True,
                                     int(its[k]), float(err[k])))
    return out


def check_violations(case: GridCase, sol: PowerFlowSolution) -> ViolationReport:
    """Per-line apparent-power overload fraction and per-bus voltage band excess."""
    if not sol.converged:
        raise NotConverged("limit check needs a converged power flow")
    s_abs = np.hypot(sol.line_flow_p, sol.line_flow_q)
    overload = np.maximum(0.0, s_abs / case.ratings() - 1.0)
    overload[~case.line_status()] = 0.0
    vmin = np.array([b.v_min for b in case.buses])
    vmax = np.array([b.v_max for b in case.buses])
    vv = np.maximum(0.0, np.maximum(sol.v_mag - vmax, vmin - sol.v_mag))
    return ViolationReport(overload, vv)
