import time

import numpy as np
import pytest

from gridattack.agents import ForecastWindow, MpcController, MpcPolicy, mpc_act, ptdf_matrix
from gridattack.agents.mpc import kkt_residual
from gridattack.errors import InfeasibleWindow
from gridattack.grid import Bus, GridCase, Generator, InjectionVector, Line, dc_power_flow
from oracles import dc_sensitivity, lattice_minimum, one_step_objective


def peak_row(profile):
    return int(np.argmax(profile.load_p.sum(axis=1)))


def test_ptdf_matches_dc_power_flow(case14):
    ptdf = ptdf_matrix(case14)
    np.testing.assert_allclose(ptdf, dc_sensitivity(case14), atol=1e-12)
    p = np.random.default_rng(0).uniform(-1, 1, 14)
    p[case14.slack] = 0.0
    np.testing.assert_allclose(ptdf @ p, dc_power_flow(case14, InjectionVector(p, np.zeros(14))).line_flow_p,
                               atol=1e-12)


def test_objective_matches_independent_evaluation(case6, profile6):
    ctrl = MpcController(case6, profile6.load_buses, horizon=1)
    rng = np.random.default_rng(1)
    u = rng.uniform(ctrl.box_lo, ctrl.box_hi, (200, 5))
    t = peak_row(profile6)
    soc0 = np.array([0.05])
    ours, _ = ctrl.objective(u[:, None, :], profile6.load_p[t][None, None], profile6.load_q[t][None, None],
                             np.tile(soc0, (200, 1)))
    ref = one_step_objective(case6, profile6.load_buses, u, profile6.load_p[t], profile6.load_q[t], soc0,
                             ctrl.dt, ctrl.penalty)
    np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-14)


def test_objective_gradient_matches_finite_differences(case6, profile6):
    ctrl = MpcController(case6, profile6.load_buses, horizon=4)
    rng = np.random.default_rng(2)
    u = rng.uniform(ctrl.box_lo, ctrl.box_hi, (3, 4, 5))
    lp, lq = profile6.load_p[70:74][None].repeat(3, 0), profile6.load_q[70:74][None].repeat(3, 0)
    soc0 = np.array([[0.02], [0.5], [0.98]])
    _, g = ctrl.objective(u, lp, lq, soc0)
    h = 1e-6
    for idx in [(0, 0, 0), (1, 2, 3), (2, 3, 4), (0, 1, 4), (2, 0, 1)]:
        up, dn = u.copy(), u.copy()
        up[idx] += h
        dn[idx] -= h
        fd = (ctrl.objective(up, lp, lq, soc0)[0] - ctrl.objective(dn, lp, lq, soc0)[0])[idx[0]] / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_zero_demand_gives_idle_setpoints(case6):
    H = 4
    window = ForecastWindow(np.zeros((H, 3)), np.zeros((H, 3)), np.full((H, 2), 0.5))
    a = mpc_act(case6, window, 0.5, (4, 5, 6))
    np.testing.assert_allclose(a, 0.0, atol=1e-5)


def test_single_generator_analytic_minimizer():
    case = GridCase([Bus(1, "slack"), Bus(2, "PQ")], [Line(1, 2, 0.05, 0.1, 0.0, 5.0)],
                    [Generator(1, -9, 9, -9, 9), Generator(2, 0.0, 1.0, -1.0, 1.0)]).validate()
    window = ForecastWindow(np.array([[0.3]]), np.array([[0.0]]), np.array([[1.0]]))
    a = mpc_act(case, window, np.zeros(0), (2,))
    np.testing.assert_allclose(a, [0.3, 0.0], atol=1e-5)


def test_empty_box_raises(case6):
    case = GridCase(case6.buses, case6.lines,
                    [case6.generators[0], Generator(4, 0.5, 0.9, -0.4, 0.4), case6.generators[2]], case6.storage)
    window = ForecastWindow(np.zeros((1, 3)), np.zeros((1, 3)), np.array([[0.2, 0.4]]))
    with pytest.raises(InfeasibleWindow):
        mpc_act(case, window, 0.5, (4, 5, 6))


def test_peak_window_matches_lattice_oracle(case6, profile6):
    t = peak_row(profile6)
    ctrl = MpcController(case6, profile6.load_buses, horizon=1, tol=1e-9)
    avail = np.minimum([0.9, 0.4], profile6.renew_p[t])
    soc0 = np.array([0.5])
    lo, hi = ctrl.bounds(avail[None, None], soc0[None])
    lo, hi = lo[0, 0], hi[0, 0]
    u = ctrl.plan(profile6.load_p[t][None, None], profile6.load_q[t][None, None], avail[None, None], soc0[None])[0]
    val = one_step_objective(case6, profile6.load_buses, u, profile6.load_p[t], profile6.load_q[t], soc0,
                             ctrl.dt, ctrl.penalty)[0]
    args = (case6, profile6.load_buses)
    rest = (profile6.load_p[t], profile6.load_q[t], soc0, ctrl.dt, ctrl.penalty)
    t0 = time.perf_counter()
    coarse, best = lattice_minimum(*args, lo, hi, *rest, step=0.01)
    # refine the lattice around its own winner to tighten the oracle
    fine, _ = lattice_minimum(*args, np.maximum(lo, best - 0.01), np.minimum(hi, best + 0.01), *rest, step=0.001)
    assert time.perf_counter() - t0 < 120
    assert val <= coarse + 1e-12
    assert val <= fine + 1e-12
    assert abs(val - min(coarse, fine)) <= 1e-4


def test_compiled_and_numpy_solvers_agree(case6, profile6):
    ctrl = MpcController(case6, profile6.load_buses, horizon=6)
    rng = np.random.default_rng(0)
    rows = rng.integers(0, profile6.T - 6, 5)
    lp = np.array([profile6.load_p[r:r + 6] for r in rows]) * rng.uniform(0.8, 1.3, (5, 1, 3))
    lq = np.array([profile6.load_q[r:r + 6] for r in rows])
    avail = np.minimum([0.9, 0.4], np.array([profile6.renew_p[r:r + 6] for r in rows]))
    soc0 = rng.uniform(0, 1, (5, 1))
    fast = ctrl.plan(lp, lq, avail, soc0)
    assert np.all(ctrl.last_residual < ctrl.tol)
    slow = ctrl.plan(lp, lq, avail, soc0, compiled=False)
    assert np.all(ctrl.last_residual < ctrl.tol)
    f_fast = ctrl.objective(fast, lp, lq, soc0)[0]
    f_slow = ctrl.objective(slow, lp, lq, soc0)[0]
    np.testing.assert_allclose(f_fast, f_slow, rtol=1e-6, atol=1e-9)
    lo, hi = ctrl.bounds(avail, soc0)
    assert np.all(kkt_residual(fast, ctrl.objective(fast, lp, lq, soc0)[1], lo, hi) < 1e-6)


def test_policy_output_in_box_and_batch_consistent(voltage_env):
    pol = MpcPolicy(voltage_env, horizon=8)
    s = voltage_env.reset(2)
    rng = np.random.default_rng(0)
    S = np.clip(s + rng.uniform(-0.05, 0.05, (6, s.size)), 0, 1)
    S[3] = S[1]
    batch = pol.query_batch(S)
    assert np.all(batch >= voltage_env.action_low) and np.all(batch <= voltage_env.action_high)
    np.testing.assert_allclose(batch[3], batch[1])
    for k in (0, 2):
        np.testing.assert_allclose(pol.query(S[k]), batch[k], atol=1e-9)


def test_policy_measured_modes(voltage_env):
    s = voltage_env.reset(4)
    soc_only = MpcPolicy(voltage_env, horizon=4)
    everything = MpcPolicy(voltage_env, horizon=4, measured="all")
    lay = voltage_env.layout
    moved = s.copy()
    moved[lay.index("load_p_6")] = 1.0
    # with loads taken from the forecast, a perturbed load reading changes nothing
    np.testing.assert_array_equal(soc_only.query(moved), soc_only.query(s))
    assert not np.allclose(everything.query(moved), everything.query(s))
    moved = s.copy()
    moved[lay.index("soc_6")] = 0.0
    assert not np.allclose(soc_only.query(moved), soc_only.query(s))
    with pytest.raises(ValueError):
        MpcPolicy(voltage_env, measured="loads")
