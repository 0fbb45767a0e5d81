from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class StepOutcome:
    next_state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``s, r, done, info = env.step(a)``
        return iter((self.next_state, self.reward, self.done, self.info))
