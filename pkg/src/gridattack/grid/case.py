"""Static network description in per-unit and its JSON file format."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParseError, ValidationError

BUS_TYPES = ("slack", "PV", "PQ")


@dataclass(frozen=True)
class Bus:
    id: int
    type: str = "PQ"
    v_min: float = 0.95
    v_max: float = 1.05
    shunt_b: float = 0.0


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    rating: float = 1.0
    in_service: bool = True


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost_coeff: float = 0.0


@dataclass(frozen=True)
class Storage:
    bus: int
    capacity: float
    soc: float
    p_charge_max: float
    efficiency: float = 1.0


# JSON key -> dataclass field, for the two places where they differ
_LINE_KEYS = {"from": "from_bus", "to": "to_bus"}


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...] = ()
    storage: tuple[Storage, ...] = ()
    base_mva: float = 100.0
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "storage", tuple(self.storage))
        object.__setattr__(self, "_index", {b.id: i for i, b in enumerate(self.buses)})

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_line(self) -> int:
        return len(self.lines)

    @property
    def slack(self) -> int:
        """Position of the slack bus."""
        return next(i for i, b in enumerate(self.buses) if b.type == "slack")

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise ValidationError(f"unknown bus id {bus_id}") from None

    def line_index(self, from_bus: int, to_bus: int) -> int:
        """Position of the first line joining two buses, in either orientation."""
        for k, ln in enumerate(self.lines):
            if {ln.from_bus, ln.to_bus} == {from_bus, to_bus}:
                return k
        raise ValidationError(f"no line between buses {from_bus} and {to_bus}")

    def line_ends(self) -> tuple[np.ndarray, np.ndarray]:
        f = np.array([self._index[ln.from_bus] for ln in self.lines], dtype=int)
        t = np.array([self._index[ln.to_bus] for ln in self.lines], dtype=int)
        return f, t

    def line_status(self) -> np.ndarray:
        return np.array([ln.in_service for ln in self.lines], dtype=bool)

    def ratings(self) -> np.ndarray:
        return np.array([ln.rating for ln in self.lines], dtype=float)

    def with_line_status(self, status) -> GridCase:
        status = np.asarray(status, dtype=bool)
        lines = tuple(dataclasses.replace(ln, in_service=bool(s)) for ln, s in zip(self.lines, status))
        return dataclasses.replace(self, lines=lines)

    def validate(self) -> GridCase:
        """Check every structural invariant, raising ValidationError on the first breach."""
        if not self.base_mva > 0:
            raise ValidationError("base_mva: must be positive")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValidationError("buses: duplicate bus id")
        for i, b in enumerate(self.buses):
            if b.type not in BUS_TYPES:
                raise ValidationError(f"buses[{i}].type: must be one of {BUS_TYPES}, got {b.type!r}")
            if not b.v_min < b.v_max:
                raise ValidationError(f"buses[{i}]: v_min must be below v_max")
        n_slack = sum(b.type == "slack" for b in self.buses)
        if n_slack != 1:
            raise ValidationError(f"buses: exactly one slack bus required, found {n_slack}")
        for i, ln in enumerate(self.lines):
            for end, bid in (("from", ln.from_bus), ("to", ln.to_bus)):
                if bid not in self._index:
                    raise ValidationError(f"lines[{i}].{end}: references missing bus {bid}")
            if ln.from_bus == ln.to_bus:
                raise ValidationError(f"lines[{i}]: endpoints must differ")
            if ln.r < 0:
                raise ValidationError(f"lines[{i}].r: must be >= 0")
            if ln.x == 0:
                raise ValidationError(f"lines[{i}].x: must be nonzero")
            if not ln.rating > 0:
                raise ValidationError(f"lines[{i}].rating: must be > 0")
        for i, g in enumerate(self.generators):
            if g.bus not in self._index:
                raise ValidationError(f"generators[{i}].bus: references missing bus {g.bus}")
            if g.p_min > g.p_max or g.q_min > g.q_max:
                raise ValidationError(f"generators[{i}]: empty power box")
        for i, s in enumerate(self.storage):
            if s.bus not in self._index:
                raise ValidationError(f"storage[{i}].bus: references missing bus {s.bus}")
            if not 0 <= s.soc <= s.capacity:
                raise ValidationError(f"storage[{i}].soc: must satisfy 0 <= soc <= capacity")
            if not 0 < s.efficiency <= 1:
                raise ValidationError(f"storage[{i}].efficiency: must satisfy 0 < efficiency <= 1")
            if s.p_charge_max < 0:
                raise ValidationError(f"storage[{i}].p_charge_max: must be >= 0")
        return self

    def to_dict(self) -> dict:
        def line_dict(ln):
            d = dataclasses.asdict(ln)
            return {"from": d.pop("from_bus"), "to": d.pop("to_bus"), **d}

        return {
            "base_mva": self.base_mva,
            "buses": [dataclasses.asdict(b) for b in self.buses],
            "lines": [line_dict(ln) for ln in self.lines],
            "generators": [dataclasses.asdict(g) for g in self.generators],
            "storage": [dataclasses.asdict(s) for s in self.storage],
        }


def _build(cls, raw, path: str, rename=None):
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: expected an object")
    rename = rename or {}
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in raw.items():
        name = rename.get(key, key)
        if name not in names or key in rename.values():
            raise ValidationError(f"{path}.{key}: unknown key")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


_TOP_KEYS = ("base_mva", "buses", "lines", "generators", "storage")


def case_from_dict(raw: dict) -> GridCase:
    if not isinstance(raw, dict):
        raise ParseError("case: top level must be an object")
    unknown = sorted(set(raw) - set(_TOP_KEYS))
    if unknown:
        raise ValidationError(f"case.{unknown[0]}: unknown key")
    for key in ("buses", "lines"):
        if key not in raw:
            raise ValidationError(f"case.{key}: missing")
    buses = [_build(Bus, b, f"buses[{i}]") for i, b in enumerate(raw["buses"])]
    lines = [_build(Line, ln, f"lines[{i}]", _LINE_KEYS) for i, ln in enumerate(raw["lines"])]
    gens = [_build(Generator, g, f"generators[{i}]") for i, g in enumerate(raw.get("generators", []))]
    stor = [_build(Storage, s, f"storage[{i}]") for i, s in enumerate(raw.get("storage", []))]
    case = GridCase(buses, lines, gens, stor, float(raw.get("base_mva", 100.0)))
    return case.validate()


def load_case(path) -> GridCase:
    """Read and validate a grid case JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return case_from_dict(raw)


def save_case(case: GridCase, path) -> None:
    Path(path).write_text(json.dumps(case.to_dict(), indent=2) + "\n")
