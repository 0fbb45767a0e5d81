from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ValidationError


@dataclass
class TrainConfig:
    """Hyperparameters for both trainers; each ignores the fields it does not use."""

    gamma: float = 0.9
    lr: float = 1e-3
    steps: int = 50_000
    seed: int = 0
    hidden: tuple = (64, 64)
    max_grad_norm: float = 1.0
    reward_scale: float = 1.0
    # A2C
    n_step: int = 8
    n_envs: int = 8
    entropy_coef: float = 1e-3
    value_coef: float = 0.5
    log_std_init: float = -0.5
    lr_final_frac: float = 0.1
    # DQN
    batch_size: int = 32
    buffer_capacity: int = 50_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.5
    target_sync: int = 500
    learning_starts: int = 500
    train_freq: int = 1

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.validate()

    def validate(self) -> TrainConfig:
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("TrainConfig.gamma: must lie in [0, 1)")
        for name in ("lr", "steps", "n_step", "n_envs", "batch_size", "buffer_capacity", "target_sync",
                     "train_freq", "reward_scale"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"TrainConfig.{name}: must be positive")
        for name in ("entropy_coef", "value_coef", "learning_starts"):
            if getattr(self, name) < 0:
                raise ValidationError(f"TrainConfig.{name}: must be >= 0")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValidationError("TrainConfig: need 0 <= eps_end <= eps_start <= 1")
        return self

    @classmethod
    def preset(cls, agent: str, **overrides) -> TrainConfig:
        """Settings tuned for the bundled tasks, with any field overridden by keyword."""
        if agent not in PRESETS:
            raise ValidationError(f"TrainConfig.preset: unknown agent {agent!r}")
        return cls(**{**PRESETS[agent], **overrides})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


# The voltage task is nearly myopic, so a short discount gives a cleaner
# advantage signal; small initial noise keeps the deterministic policy close
# to the one being trained. Topology rewards are scaled so the cascade penalty
# fits inside the clipped TD error.
PRESETS = {
    "a2c": {"gamma": 0.5, "steps": 100_000, "log_std_init": -1.5},
    "dqn": {"steps": 50_000, "reward_scale": 0.01},
}
