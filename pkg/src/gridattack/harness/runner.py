"""Train or load agents and evaluate them under each attack kind."""
from __future__ import annotations

import logging
from pathlib import Path

from ..agents import MpcPolicy, TrainConfig, load_policy, save_policy, train_a2c, train_dqn
from ..attack import ATTACK_KINDS, ManipulationTarget, attack_episode
from ..envs import TopologyEnv, VoltageEnv, load_profile
from ..errors import ValidationError
from ..grid import load_case
from .config import ExperimentConfig
from .report import ReportTable, emit_report
from .seeding import substream, substream_seed

log = logging.getLogger(__name__)


def make_env(cfg: ExperimentConfig):
    case_path, profile_path = cfg.paths()
    case, profile = load_case(case_path), load_profile(profile_path)
    return VoltageEnv(case, profile) if cfg.task == "voltage" else TopologyEnv(case, profile)


def train_config(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    return TrainConfig.preset(cfg.agent, **{**cfg.train, "seed": substream_seed(seed, "train")})


def checkpoint_path(cfg: ExperimentConfig, seed: int) -> Path | None:
    """``checkpoint`` may be a file, a ``{seed}`` template or a directory of ``<agent>_seed<k>.json``."""
    if cfg.checkpoint is None:
        return None
    if "{seed}" in cfg.checkpoint:
        return Path(cfg.checkpoint.format(seed=seed))
    p = Path(cfg.checkpoint)
    return p / f"{cfg.agent}_seed{seed}.json" if p.is_dir() else p


def train_agent(cfg: ExperimentConfig, env, seed: int):
    tc = train_config(cfg, seed)
    return train_a2c(env, tc) if cfg.agent == "a2c" else train_dqn(env, tc)


def make_policy(cfg: ExperimentConfig, env, seed: int):
    """The seed's agent: MPC is built directly, learners are loaded or trained."""
    if cfg.agent == "mpc":
        return MpcPolicy(env, horizon=cfg.mpc_horizon)
    path = checkpoint_path(cfg, seed)
    if path is not None:
        policy = load_policy(path)
        if policy.state_dim != env.state_dim or policy.kind != env.kind:
            raise ValidationError(f"ExperimentConfig.checkpoint: {path} holds a {policy.kind} policy for "
                                  f"{policy.state_dim}-dim states; the {cfg.task} task needs {env.kind}, "
                                  f"{env.state_dim}")
        return policy
    return train_agent(cfg, env, seed)


def save_trained(cfg: ExperimentConfig, out_dir) -> list[Path]:
    """Train one learner per seed and write ``<agent>_seed<k>.json`` checkpoints."""
    if cfg.agent == "mpc":
        raise ValidationError("ExperimentConfig.agent: mpc has nothing to train")
    env = make_env(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in sorted(cfg.seeds):
        policy = train_agent(cfg, env, seed)
        p = out / f"{cfg.agent}_seed{seed}.json"
        save_policy(policy, p)
        paths.append(p)
    return paths


def run_seed(cfg: ExperimentConfig, env, policy, seed: int, records: list) -> None:
    """All episodes of every attack kind for one seed. Episode ``i`` sees the
    same load window and jitter under every kind."""
    target = target_line = None
    if cfg.target_line is not None:
        target = ManipulationTarget.line(env.case, *cfg.target_line)
        target_line = target.element
    for kind in cfg.kinds:
        for i in range(cfg.episodes):
            rec = attack_episode(env, policy, cfg.attack, kind,
                                 target=target if kind == "manipulation" else None,
                                 seed=substream_seed(seed, "profile", i),
                                 rng=substream(seed, "attack", ATTACK_KINDS.index(kind), i),
                                 target_line=target_line)
            rec.meta.update(agent=cfg.agent, run_seed=seed, episode=i)
            records.append(rec)


def run_experiment(cfg: ExperimentConfig, policies: dict | None = None) -> ReportTable:
    """Evaluate the configured agent under the ``none`` control and every requested attack.

    ``policies`` optionally maps seeds to ready agents, skipping training. The
    returned table carries the records in ``table.records``. With ``cfg.out``
    set the report files are written there; if a run fails part way the
    episodes finished so far are written before the error propagates.
    """
    cfg.validate()
    env = make_env(cfg)
    records: list = []
    meta = {"config": cfg.to_dict()}
    try:
        for seed in sorted(cfg.seeds):
            policy = (policies or {}).get(seed) or make_policy(cfg, env, seed)
            run_seed(cfg, env, policy, seed, records)
            log.info("seed %d done: %d episodes so far", seed, len(records))
    except BaseException:
        if cfg.out and records:
            partial = ReportTable.from_records(records, {**meta, "partial": True})
            emit_report(partial, records, cfg.out, timeseries=cfg.timeseries)
        raise
    table = ReportTable.from_records(records, meta)
    table.records = records
    if cfg.out:
        emit_report(table, records, cfg.out, timeseries=cfg.timeseries)
    return table
