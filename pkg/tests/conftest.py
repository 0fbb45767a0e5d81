"""Shared fixtures, cached trained agents and the suite-wide budget audit."""
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

import gridattack
import gridattack.attack as attack_pkg
import gridattack.attack.episode as episode_mod
import gridattack.attack.pgd as pgd_mod
from gridattack import data_path
from gridattack.agents import load_policy, save_policy
from gridattack.envs import TopologyEnv, VoltageEnv, load_profile
from gridattack.grid import load_case
from gridattack.harness import ExperimentConfig, make_env, train_config
from gridattack.harness.runner import train_agent

# ---------------------------------------------------------------------------
# budget audit: every perturbation produced anywhere in the suite is checked

AUDIT = {"calls": 0, "violations": []}


def _audit(s, s_adv, cfg, where):
    s = np.asarray(s, float)
    s_adv = np.asarray(s_adv, float)
    delta = s_adv - s
    eps = cfg.epsilon
    if cfg.norm_p == 0:
        ok = np.count_nonzero(delta) <= cfg.k_sparse and np.all(np.abs(delta) <= eps + 1e-12)
    elif np.isinf(cfg.norm_p):
        ok = np.max(np.abs(delta), initial=0.0) <= eps + 1e-12
    else:
        ok = np.sqrt(np.sum(delta ** 2)) <= eps + 1e-12
    ok = ok and np.all(s_adv >= 0.0) and np.all(s_adv <= 1.0)
    AUDIT["calls"] += 1
    if not ok:
        AUDIT["violations"].append((where, cfg.norm_p, eps, float(np.max(np.abs(delta)))))


_craft = pgd_mod.craft_perturbation
_random = pgd_mod.random_perturbation


def audited_craft(policy, env_view, s, cfg, target=None, a_clean=None):
    s_adv, trace = _craft(policy, env_view, s, cfg, target, a_clean)
    _audit(s, s_adv, cfg, "craft_perturbation")
    for row in trace.iters:
        if cfg.norm_p != 0 and row["delta_norm"] > cfg.epsilon + 1e-12:
            AUDIT["violations"].append(("trace", cfg.norm_p, cfg.epsilon, row["delta_norm"]))
    return s_adv, trace


def audited_random(s, cfg, rng):
    s_adv = _random(s, cfg, rng)
    _audit(s, s_adv, cfg, "random_perturbation")
    return s_adv


for _mod in (pgd_mod, attack_pkg, episode_mod):
    _mod.craft_perturbation = audited_craft
    _mod.random_perturbation = audited_random


def pytest_collection_modifyitems(config, items):
    # the budget criterion summarizes the audit, so it runs after everything else
    last = [it for it in items if it.get_closest_marker("audit_summary")]
    items[:] = [it for it in items if it not in last] + last


def pytest_configure(config):
    config.addinivalue_line("markers", "audit_summary: runs after every other test")


def pytest_sessionfinish(session, exitstatus):
    if AUDIT["violations"]:
        print(f"\nbudget audit: {len(AUDIT['violations'])} violations in {AUDIT['calls']} perturbations")
        for v in AUDIT["violations"][:10]:
            print("  ", v)
        session.exitstatus = 1


@pytest.fixture
def budget_audit():
    return AUDIT


# ---------------------------------------------------------------------------
# bundled data


@pytest.fixture(scope="session")
def case6():
    return load_case(data_path("cases", "case6.json"))


@pytest.fixture(scope="session")
def case14():
    return load_case(data_path("cases", "case14.json"))


@pytest.fixture(scope="session")
def profile6():
    return load_profile(data_path("profiles", "case6_synthetic.csv"))


@pytest.fixture(scope="session")
def profile14():
    return load_profile(data_path("profiles", "case14_synthetic.csv"))


@pytest.fixture
def voltage_env(case6, profile6):
    return VoltageEnv(case6, profile6)


@pytest.fixture
def topology_env(case14, profile14):
    return TopologyEnv(case14, profile14)


# ---------------------------------------------------------------------------
# trained agents, cached on disk keyed by the code and data that produce them

_SOURCES = ["agents/a2c.py", "agents/dqn.py", "agents/nn.py", "agents/policy.py", "agents/config.py",
            "agents/replay.py", "envs/voltage.py", "envs/topology.py", "envs/normalize.py", "envs/profile.py",
            "grid/powerflow.py", "grid/case.py", "harness/seeding.py", "harness/runner.py",
            "data/cases/case6.json", "data/cases/case14.json", "data/profiles/case6_synthetic.csv",
            "data/profiles/case14_synthetic.csv"]
_MEMO: dict = {}


def _fingerprint(tc) -> str:
    root = Path(gridattack.__file__).parent
    h = hashlib.sha256(json.dumps(tc.to_dict(), sort_keys=True).encode())
    for rel in _SOURCES:
        h.update((root / rel).read_bytes())
    return h.hexdigest()[:16]


@pytest.fixture(scope="session")
def trained(request):
    """``trained(agent, seed)`` returns the harness-trained learner for a master seed."""
    cache = request.config.cache.mkdir("trained-agents")

    def get(agent, seed):
        key = (agent, seed)
        if key not in _MEMO:
            cfg = ExperimentConfig(task="voltage" if agent == "a2c" else "topology", agent=agent, seeds=(seed,))
            path = cache / f"{agent}_seed{seed}_{_fingerprint(train_config(cfg, seed))}.json"
            if path.exists():
                _MEMO[key] = load_policy(path)
            else:
                policy = train_agent(cfg, make_env(cfg), seed)
                save_policy(policy, path)
                _MEMO[key] = load_policy(path)
        return _MEMO[key]

    return get
