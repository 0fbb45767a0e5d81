"""Min-max state normalisation. The attack budget is measured in this space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StateLayout:
    """Named state coordinates with the static physical bounds of each."""

    names: tuple[str, ...]
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        if not (len(self.names) == len(self.low) == len(self.high)):
            raise ValueError("layout arrays differ in length")
        if np.any(self.high <= self.low):
            raise ValueError("layout bounds must satisfy low < high")

    @classmethod
    def from_entries(cls, entries) -> StateLayout:
        names, lo, hi = zip(*entries)
        return cls(tuple(names), np.array(lo, float), np.array(hi, float))

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def normalize(self, raw) -> np.ndarray:
        raw = np.clip(np.asarray(raw, float), self.low, self.high)
        return (raw - self.low) / (self.high - self.low)

    def denormalize(self, s) -> np.ndarray:
        return self.low + np.asarray(s, float) * (self.high - self.low)


def normalize_state(env, raw) -> np.ndarray:
    return env.layout.normalize(raw)


def denormalize_state(env, s) -> np.ndarray:
    return env.layout.denormalize(s)
