"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion."""
import time

import numpy as np
import pytest

from gridattack.agents import TrainConfig, train_a2c, train_dqn
from gridattack.attack import AttackConfig, craft_perturbation, distortion_loss, estimate_gradient
from gridattack.envs import BanditEnv, ChainEnv
from gridattack.grid import InjectionVector, ac_power_flow
from gridattack.harness import ExperimentConfig, ReportTable, run_experiment
from oracles import exact_q, gauss_seidel, ybus_by_hand

SEEDS = (0, 1, 2)
MPC_EPISODES = 6
TABLES: dict = {}


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    return say


def subset(table, seed, episodes=None):
    keep = [r for r in table.records if r.meta["run_seed"] == seed
            and (episodes is None or r.meta["episode"] < episodes)]
    return ReportTable.from_records(keep)


def per_seed(table, seed):
    return subset(table, seed)


@pytest.fixture(scope="module")
def a2c_table():
    cfg = ExperimentConfig(task="voltage", agent="a2c", attacks=("random", "distortion"), episodes=200,
                           seeds=SEEDS)
    t0 = time.perf_counter()
    table = run_experiment(cfg)  # end to end, including training
    TABLES["a2c"] = table
    return table, time.perf_counter() - t0


@pytest.fixture(scope="module")
def mpc_table():
    cfg = ExperimentConfig(task="voltage", agent="mpc", attacks=("distortion",), episodes=MPC_EPISODES, seeds=SEEDS)
    TABLES["mpc"] = table = run_experiment(cfg)
    return table


@pytest.fixture(scope="module")
def manip_table(trained):
    cfg = ExperimentConfig(task="voltage", agent="a2c", attacks=("manipulation",), episodes=25, seeds=(0, 1),
                           target_line="3-6")
    TABLES["manipulation"] = table = run_experiment(cfg, {s: trained("a2c", s) for s in cfg.seeds})
    return table


@pytest.fixture(scope="module")
def dqn_table(trained):
    cfg = ExperimentConfig(task="topology", agent="dqn", attacks=("distortion",), episodes=200, seeds=SEEDS)
    TABLES["dqn"] = table = run_experiment(cfg, {s: trained("dqn", s) for s in SEEDS})
    return table


def test_power_flow_matches_gauss_seidel(case6, verdict):
    rng = np.random.default_rng(2024)
    ybus = ybus_by_hand(case6)
    worst, elapsed, n = 0.0, 0.0, 0
    while n < 100:
        p = np.zeros(6)
        q = np.zeros(6)
        p[1:] = -rng.uniform(0.0, 0.5, 5)
        q[1:] = -rng.uniform(-0.1, 0.2, 5)
        p[3] += rng.uniform(0.0, 0.9)
        p[4] += rng.uniform(0.0, 0.4)
        t0 = time.perf_counter()
        sol = ac_power_flow(case6, InjectionVector(p, q))
        elapsed += time.perf_counter() - t0
        if not sol.converged:
            continue
        n += 1
        v = gauss_seidel(ybus, p + 1j * q, case6.slack)
        worst = max(worst, np.max(np.abs(sol.v_mag * np.exp(1j * sol.v_ang) - v)))
    ok = worst < 1e-6 and elapsed < 10.0
    verdict(1, ok, f"max |V_nr - V_gs| = {worst:.2e} p.u. over 100 injections, NR time {elapsed:.2f} s")
    assert ok


def test_finite_difference_gradient_fidelity(voltage_env, trained, verdict):
    policy = trained("a2c", 0)
    rng = np.random.default_rng(7)
    states = []
    seed = 0
    while len(states) < 200:
        s, done = voltage_env.reset(3000 + seed), False
        while not done:
            if rng.random() < 0.05:
                states.append(s)
            s, _, done, _ = voltage_env.step(policy.query(s))
        seed += 1
    cos = []
    for s in states[:200]:
        a = policy.query(s)
        x = np.clip(s + rng.uniform(-0.05, 0.05, s.shape), 0.0, 1.0)
        diff = policy.query(x) - a
        analytic = policy.input_gradient(x, diff / np.linalg.norm(diff))
        fd = estimate_gradient(lambda y: distortion_loss(policy, y, a), x, 1e-4, bounds=(0.0, 1.0))
        cos.append(fd @ analytic / (np.linalg.norm(fd) * np.linalg.norm(analytic)))
    frac = float(np.mean(np.array(cos) > 0.99))
    ok = frac >= 0.95
    verdict(2, ok, f"cosine > 0.99 on {frac:.1%} of 200 states (median {np.median(cos):.6f})")
    assert ok


def test_distortion_degrades_a2c_more_than_random(a2c_table, verdict):
    table, elapsed = a2c_table
    ordered = noise = twice = 0
    parts = []
    for seed in SEEDS:
        t = per_seed(table, seed)
        none, rnd, dist = (t.row("a2c", k).reward_mean for k in ("none", "random", "distortion"))
        ordered += none >= rnd
        noise += rnd >= dist
        twice += t.degradation("a2c", "distortion") >= 2 * t.degradation("a2c", "random")
        parts.append(f"seed {seed}: {none:.3f}/{rnd:.3f}/{dist:.3f}")
    ok = ordered >= 2 and noise >= 2 and twice >= 2 and elapsed < 3600
    verdict(4, ok, f"none/random/distortion reward {'; '.join(parts)}; ordering {ordered}/3, {noise}/3, "
                   f"2x degradation {twice}/3; {elapsed:.0f} s end to end")
    assert ok


def test_mpc_more_robust_than_a2c(a2c_table, mpc_table, verdict):
    a2c = a2c_table[0]
    mpc_deg = np.mean([per_seed(mpc_table, s).degradation("mpc", "distortion") for s in SEEDS])
    a2c_deg = np.mean([per_seed(a2c, s).degradation("a2c", "distortion") for s in SEEDS])
    a2c_matched = np.mean([subset(a2c, s, MPC_EPISODES).degradation("a2c", "distortion") for s in SEEDS])
    ok = abs(mpc_deg) < abs(a2c_deg) and abs(mpc_deg) < abs(a2c_matched)
    verdict(5, ok, f"distortion degradation mpc {mpc_deg:.4f} vs a2c {a2c_deg:.4f} "
                   f"({a2c_matched:.4f} on the same {MPC_EPISODES} episodes per seed)")
    assert ok


def test_manipulation_overloads_target_line(manip_table, verdict):
    none = manip_table.row("a2c", "none").margin_mean
    attack = manip_table.row("a2c", "manipulation").margin_mean
    recs = [r for r in manip_table.records if r.attack == "manipulation"]
    clean = [r for r in manip_table.records if r.attack == "none"]
    frac = float(np.mean([r.overload_steps > 0 for r in recs]))
    frac_clean = float(np.mean([r.overload_steps > 0 for r in clean]))
    ok = len(recs) == 50 and attack > none and frac >= 0.2
    verdict(6, ok, f"line 3-6 margin {none:.4f} -> {attack:.4f}, overloaded in {frac:.0%} of {len(recs)} attacked "
                   f"episodes ({frac_clean:.0%} without attack)")
    assert ok


def test_distortion_shortens_dqn_survival(dqn_table, verdict):
    none = dqn_table.row("dqn", "none").steps_mean
    dist = dqn_table.row("dqn", "distortion").steps_mean
    drop = (none - dist) / none
    seeds = ", ".join(f"{per_seed(dqn_table, s).row('dqn', 'none').steps_mean:.1f}->"
                      f"{per_seed(dqn_table, s).row('dqn', 'distortion').steps_mean:.1f}" for s in SEEDS)
    ok = drop >= 0.30
    verdict(7, ok, f"survival {none:.2f} -> {dist:.2f} steps ({drop:.0%} drop; per seed {seeds})")
    assert ok


def test_attack_latency(a2c_table, mpc_table, manip_table, dqn_table, verdict):
    rows = [(name, r) for name, t in TABLES.items() for r in t.rows if r.attack != "none"]
    worst = max(rows, key=lambda x: x[1].ms_per_step_mean)
    flags = [f for t in TABLES.values() for f in t.flags]
    ok = len(rows) == 5 and worst[1].ms_per_step_mean < 500 and not flags
    detail = ", ".join(f"{n}/{r.attack} {r.ms_per_step_mean:.1f}" for n, r in rows)
    verdict(8, ok, f"ms per step: {detail}; report flags {len(flags)}")
    assert ok


def test_trainer_oracles(verdict):
    t0 = time.perf_counter()
    bandit = train_a2c(BanditEnv(2), TrainConfig(gamma=0.9, steps=200_000, n_envs=128, lr=3e-3, lr_final_frac=0.03,
                                                 n_step=1))
    t_bandit = time.perf_counter() - t0
    S = np.random.default_rng(123).random((1000, 2))
    err_bandit = float(np.max(np.abs(bandit.query_batch(S) - S)))
    t0 = time.perf_counter()
    chain = train_dqn(ChainEnv(), TrainConfig(gamma=0.9, steps=20_000, lr=3e-3, hidden=(16, 16), learning_starts=100,
                                              target_sync=100, lr_final_frac=0.01, eps_end=0.3))
    t_chain = time.perf_counter() - t0
    q_star = exact_q(2, 2, ChainEnv.reward, ChainEnv.transition, 0.9)
    err_chain = float(np.max(np.abs(chain.q_values_batch(np.eye(2)) - q_star)))
    ok = err_bandit < 0.1 and err_chain < 1e-2 and t_bandit < 300 and t_chain < 300
    verdict(9, ok, f"bandit max error {err_bandit:.3f} ({t_bandit:.0f} s), chain Q error {err_chain:.1e} "
                   f"({t_chain:.0f} s)")
    assert ok


def test_distortion_monotone_in_budget(voltage_env, trained, verdict):
    budgets = (0.0, 0.01, 0.05, 0.1)
    losses = {e: [] for e in budgets}
    for seed in SEEDS:
        policy = trained("a2c", seed)
        rng = np.random.default_rng(seed)
        states, ep = [], 0
        while len(states) < 50:
            s, done = voltage_env.reset(5000 + 100 * seed + ep), False
            while not done:
                if rng.random() < 0.1:
                    states.append(s)
                s, _, done, _ = voltage_env.step(policy.query(s))
            ep += 1
        for s in states[:50]:
            a = policy.query(s)
            for e in budgets:
                s_adv, _ = craft_perturbation(policy, None, s, AttackConfig(epsilon=e))
                losses[e].append(distortion_loss(policy, s_adv, a))
    means = [float(np.mean(losses[e])) for e in budgets]
    zero = all(x == 0.0 for x in losses[0.0])
    ok = zero and all(a <= b for a, b in zip(means, means[1:])) and len(losses[0.1]) == 150
    verdict(10, ok, "mean distortion " + ", ".join(f"eps={e}: {m:.4f}" for e, m in zip(budgets, means))
            + f"; eps=0 exactly zero: {zero}")
    assert ok


@pytest.mark.audit_summary
def test_budget_never_exceeded(budget_audit, verdict):
    calls, bad = budget_audit["calls"], budget_audit["violations"]
    ok = calls > 0 and not bad
    verdict(3, ok, f"{calls} perturbations audited across the suite, {len(bad)} violations")
    assert ok
