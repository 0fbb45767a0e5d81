"""Experiment configuration: one JSON document fully describes a run."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import data_path
from ..attack import ATTACK_KINDS, AttackConfig
from ..errors import ParseError, ValidationError

TASKS = ("voltage", "topology")
AGENTS = ("a2c", "dqn", "mpc")
AGENT_TASK = {"a2c": "voltage", "mpc": "voltage", "dqn": "topology"}
BUNDLED = {
    "case6": ("cases/case6.json", "profiles/case6_synthetic.csv"),
    "case14": ("cases/case14.json", "profiles/case14_synthetic.csv"),
}
DEFAULT_CASE = {"voltage": "case6", "topology": "case14"}


def resolve_case(case: str | None, profile: str | None, task: str) -> tuple[str, str]:
    """Paths for a bundled case name (``case6``/``case14``) or explicit files."""
    name = case or DEFAULT_CASE[task]
    if name in BUNDLED:
        c, p = BUNDLED[name]
        return str(data_path(*c.split("/"))), profile or str(data_path(*p.split("/")))
    if profile is None:
        raise ValidationError("ExperimentConfig.profile: required when the case is a file path")
    return name, profile


def parse_line(spec) -> tuple[int, int] | None:
    """``"3-6"`` or ``[3, 6]`` to a bus pair."""
    if spec is None:
        return None
    if isinstance(spec, str):
        parts = spec.replace(",", "-").split("-")
    else:
        parts = list(spec)
    try:
        a, b = (int(x) for x in parts)
    except (TypeError, ValueError):
        raise ValidationError(f"ExperimentConfig.target_line: expected 'FROM-TO', got {spec!r}") from None
    return a, b


@dataclass
class ExperimentConfig:
    task: str = "voltage"
    agent: str = "a2c"
    attacks: tuple = ("none",)
    attack: AttackConfig = field(default_factory=AttackConfig)
    episodes: int = 200
    seeds: tuple = (0, 1, 2)
    case: str | None = None
    profile: str | None = None
    checkpoint: str | None = None
    target_line: tuple | None = None
    train: dict = field(default_factory=dict)
    mpc_horizon: int = 16
    timeseries: int = 1
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.attacks, str):
            self.attacks = (self.attacks,)
        self.attacks = tuple(self.attacks)
        self.seeds = tuple(int(s) for s in self.seeds)
        if isinstance(self.attack, dict):
            self.attack = AttackConfig.from_dict(self.attack)
        self.target_line = parse_line(self.target_line)
        self.validate()

    @property
    def kinds(self) -> tuple:
        """Attack kinds to run, the ``none`` control first and no duplicates."""
        rest = [k for k in self.attacks if k != "none"]
        return ("none", *dict.fromkeys(rest))

    def paths(self) -> tuple[str, str]:
        return resolve_case(self.case, self.profile, self.task)

    def validate(self) -> ExperimentConfig:
        if self.task not in TASKS:
            raise ValidationError(f"ExperimentConfig.task: must be one of {TASKS}, got {self.task!r}")
        if self.agent not in AGENTS:
            raise ValidationError(f"ExperimentConfig.agent: must be one of {AGENTS}, got {self.agent!r}")
        if AGENT_TASK[self.agent] != self.task:
            raise ValidationError(f"ExperimentConfig.agent: {self.agent} runs only on the "
                                  f"{AGENT_TASK[self.agent]} task, not {self.task}")
        for k in self.attacks:
            if k not in ATTACK_KINDS:
                raise ValidationError(f"ExperimentConfig.attacks: unknown kind {k!r}; known {ATTACK_KINDS}")
        if "manipulation" in self.attacks:
            if self.task != "voltage":
                raise ValidationError("ExperimentConfig.attacks: manipulation needs the voltage task")
            if self.target_line is None:
                raise ValidationError("ExperimentConfig.target_line: manipulation requires a target spec")
        if not isinstance(self.episodes, int) or self.episodes < 1:
            raise ValidationError(f"ExperimentConfig.episodes: must be an integer >= 1, got {self.episodes!r}")
        if not self.seeds:
            raise ValidationError("ExperimentConfig.seeds: need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("ExperimentConfig.seeds: duplicate seeds")
        if self.mpc_horizon < 1:
            raise ValidationError("ExperimentConfig.mpc_horizon: must be >= 1")
        if self.timeseries < 0:
            raise ValidationError("ExperimentConfig.timeseries: must be >= 0")
        if self.case is not None and self.case not in BUNDLED and self.profile is None:
            raise ValidationError("ExperimentConfig.profile: required when the case is a file path")
        self.attack.validate()
        return self

    def to_dict(self) -> dict:
        return {"task": self.task, "agent": self.agent, "attacks": list(self.attacks),
                "attack": self.attack.to_dict(), "episodes": self.episodes, "seeds": list(self.seeds),
                "case": self.case, "profile": self.profile, "checkpoint": self.checkpoint,
                "target_line": None if self.target_line is None else list(self.target_line),
                "train": dict(self.train), "mpc_horizon": self.mpc_horizon, "timeseries": self.timeseries,
                "out": self.out}

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"ExperimentConfig: unknown field(s) {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ParseError(f"{path}: no such config file") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: top level must be an object")
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
