from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ValidationError

OBJECTIVES = ("distortion", "manipulation")
TARGET_KINDS = ("line-active-flow", "bus-voltage")


def parse_norm(p) -> float:
    """Accepts 0, 2, inf or their spellings ("0", "2", "inf", "linf", "l2", "l0")."""
    if isinstance(p, str):
        key = p.strip().lower().lstrip("l")
        table = {"0": 0.0, "2": 2.0, "inf": np.inf, "infinity": np.inf}
        if key not in table:
            raise ValidationError(f"AttackConfig.norm_p: unsupported norm {p!r}")
        return table[key]
    p = float(p)
    if p not in (0.0, 2.0, np.inf):
        raise ValidationError(f"AttackConfig.norm_p: unsupported norm {p!r}; use 0, 2 or inf")
    return p


@dataclass
class AttackConfig:
    """Perturbation budget and optimizer settings, all in normalized-state units.

    ``eta=None`` means ``epsilon / 5``. With ``norm_p=0`` at most ``k_sparse``
    coordinates move, each by at most ``epsilon``.
    """

    epsilon: float = 0.05
    norm_p: float = np.inf
    eta: float | None = None
    h: float = 1e-3
    max_iters: int = 10
    objective: str = "distortion"
    k_sparse: int = 1

    def __post_init__(self):
        self.norm_p = parse_norm(self.norm_p)
        self.validate()

    @property
    def step_size(self) -> float:
        return self.epsilon / 5.0 if self.eta is None else self.eta

    def validate(self) -> AttackConfig:
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValidationError("AttackConfig.epsilon: must be finite and >= 0")
        if self.eta is not None and not self.eta > 0:
            raise ValidationError("AttackConfig.eta: must be > 0")
        if not self.h > 0:
            raise ValidationError("AttackConfig.h: must be > 0")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError("AttackConfig.max_iters: must be an integer >= 1")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"AttackConfig.objective: must be one of {OBJECTIVES}")
        if self.norm_p == 0 and self.k_sparse < 1:
            raise ValidationError("AttackConfig.k_sparse: must be >= 1 for the L0 budget")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["norm_p"] = "inf" if np.isinf(self.norm_p) else int(self.norm_p)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AttackConfig:
        return cls(**d)


@dataclass(frozen=True)
class ManipulationTarget:
    """Grid element the manipulation attack pushes toward ``value``.

    ``line-active-flow``: ``element`` is a line index; the distance is
    ``value - |P_flow|`` with ``value`` defaulting to the line rating.
    ``bus-voltage``: ``element`` is a bus id; the distance is ``value - |V|``
    with ``value`` defaulting to the bus's upper voltage limit.
    """

    kind: str
    element: int
    value: float | None = None

    def check(self, case) -> ManipulationTarget:
        if self.kind not in TARGET_KINDS:
            raise ValidationError(f"ManipulationTarget.kind: must be one of {TARGET_KINDS}")
        if self.kind == "line-active-flow" and not 0 <= self.element < case.n_line:
            raise ValidationError(f"ManipulationTarget.element: no line {self.element}")
        if self.kind == "bus-voltage" and self.element not in {b.id for b in case.buses}:
            raise ValidationError(f"ManipulationTarget.element: no bus {self.element}")
        return self

    def target_value(self, case) -> float:
        if self.value is not None:
            return float(self.value)
        if self.kind == "line-active-flow":
            return float(case.lines[self.element].rating)
        return float(case.buses[case.bus_index(self.element)].v_max)

    def distance(self, case, sol) -> float:
        """Signed distance from the solution to the target (negative once past it)."""
        if self.kind == "line-active-flow":
            return self.target_value(case) - abs(float(sol.line_flow_p[self.element]))
        return self.target_value(case) - float(sol.v_mag[case.bus_index(self.element)])

    @classmethod
    def line(cls, case, from_bus: int, to_bus: int, value=None) -> ManipulationTarget:
        return cls("line-active-flow", case.line_index(from_bus, to_bus), value).check(case)
