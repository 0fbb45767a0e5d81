"""Exogenous time series (demand and renewable availability) and their CSV format."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError, ValidationError
from ..grid.case import GridCase

_COLUMN = re.compile(r"^(load_p|load_q|renew_p)_(\d+)$")


@dataclass
class Profile:
    """Per-step series; ``load_p[t, k]`` is the demand at ``load_buses[k]``."""

    load_buses: tuple[int, ...]
    load_p: np.ndarray
    load_q: np.ndarray
    renew_buses: tuple[int, ...]
    renew_p: np.ndarray

    def __post_init__(self):
        self.load_p = np.atleast_2d(np.asarray(self.load_p, float))
        self.load_q = np.atleast_2d(np.asarray(self.load_q, float))
        self.renew_p = np.asarray(self.renew_p, float).reshape(len(self.load_p), len(self.renew_buses))
        T = len(self.load_p)
        if self.load_q.shape != self.load_p.shape or len(self.renew_p) != T:
            raise ValidationError("profile: all series must share length T")
        if self.load_p.shape[1] != len(self.load_buses):
            raise ValidationError("profile: load columns do not match load buses")

    @property
    def T(self) -> int:
        return len(self.load_p)

    def check_against(self, case: GridCase) -> Profile:
        """Every referenced bus exists and renewable availability fits generator boxes."""
        for b in self.load_buses:
            case.bus_index(b)
        gens = {g.bus: g for g in case.generators}
        for k, b in enumerate(self.renew_buses):
            if b not in gens:
                raise ValidationError(f"profile.renew_p_{b}: no generator at bus {b}")
            col = self.renew_p[:, k]
            if col.min() < 0 or col.max() > gens[b].p_max + 1e-9:
                raise ValidationError(f"profile.renew_p_{b}: values outside [0, p_max]")
        if self.load_p.min() < 0:
            raise ValidationError("profile.load_p: negative demand")
        return self

    def columns(self) -> list[str]:
        return (["t"] + [f"load_p_{b}" for b in self.load_buses] + [f"load_q_{b}" for b in self.load_buses]
                + [f"renew_p_{b}" for b in self.renew_buses])


def load_profile(path) -> Profile:
    """Parse a profile CSV: header ``t, load_p_<bus>..., load_q_<bus>..., renew_p_<bus>...``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t":
        raise ParseError(f"{path}: line 1: first column must be 't'")
    groups: dict[str, list[tuple[int, int]]] = {"load_p": [], "load_q": [], "renew_p": []}
    for col, name in enumerate(header[1:], start=1):
        m = _COLUMN.match(name)
        if not m:
            raise ParseError(f"{path}: line 1: unrecognised column {name!r}")
        groups[m.group(1)].append((int(m.group(2)), col))
    load_buses = tuple(b for b, _ in groups["load_p"])
    if tuple(b for b, _ in groups["load_q"]) != load_buses:
        raise ParseError(f"{path}: line 1: load_q columns must mirror load_p columns")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric value") from None
    if not data:
        raise ParseError(f"{path}: no data rows")
    arr = np.array(data)
    pick = lambda key: arr[:, [c for _, c in groups[key]]]
    return Profile(load_buses, pick("load_p"), pick("load_q"),
                   tuple(b for b, _ in groups["renew_p"]), pick("renew_p"))


def save_profile(profile: Profile, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(profile.columns())
        for t in range(profile.T):
            vals = np.r_[profile.load_p[t], profile.load_q[t], profile.renew_p[t]]
            w.writerow([t] + [f"{v:.6f}" for v in vals])


def daily_shape(steps_per_day: int, kind: str) -> np.ndarray:
    """Normalised daily curves used by the synthetic profile builder."""
    hour = np.arange(steps_per_day) * 24.0 / steps_per_day
    if kind == "residential":
        return 0.45 + 0.2 * np.exp(-((hour - 8.0) / 2.0) ** 2) + 0.55 * np.exp(-((hour - 19.0) / 2.5) ** 2)
    if kind == "commercial":
        return 0.5 + 0.45 * np.exp(-((hour - 14.0) / 4.0) ** 2)
    if kind == "solar":
        return np.clip(np.sin(np.pi * (hour - 6.0) / 13.0), 0.0, None) ** 1.5
    raise ValueError(kind)


def synthetic_profile(peaks: dict, kinds: dict, pf: dict, renew: dict, days: int = 8,
                      steps_per_day: int = 96, seed: int = 0) -> Profile:
    """Build a multi-day profile from daily shapes plus smooth noise.

    ``peaks[bus]`` is the peak demand, ``kinds[bus]`` picks the daily shape,
    ``pf[bus]`` is the Q/P ratio and ``renew[bus] = (kind, nameplate)`` where
    kind is ``"solar"`` or ``"wind"``.
    """
    rng = np.random.default_rng(seed)
    n = days * steps_per_day
    loads = sorted(peaks)
    load_p = np.empty((n, len(loads)))
    for k, b in enumerate(loads):
        base = np.tile(daily_shape(steps_per_day, kinds[b]), days)
        base /= base.max()
        day_scale = np.repeat(rng.uniform(0.9, 1.05, days), steps_per_day)
        wiggle = 1.0 + 0.03 * _smooth_noise(rng, n, 8)
        load_p[:, k] = np.clip(peaks[b] * base * day_scale * wiggle, 0.0, None)
    load_q = load_p * np.array([pf[b] for b in loads])
    rbuses = sorted(renew)
    renew_p = np.empty((n, len(rbuses)))
    for k, b in enumerate(rbuses):
        kind, cap = renew[b]
        if kind == "solar":
            clear = np.tile(daily_shape(steps_per_day, "solar"), days)
            cloud = np.clip(1.0 - 0.3 * np.abs(_smooth_noise(rng, n, 12)), 0.2, 1.0)
            series = clear * cloud
        else:
            series = np.clip(0.5 + 0.35 * _smooth_noise(rng, n, 24), 0.0, 1.0)
        renew_p[:, k] = np.clip(cap * series, 0.0, cap)
    return Profile(tuple(loads), load_p, load_q, tuple(rbuses), renew_p)


def _smooth_noise(rng, n: int, width: int) -> np.ndarray:
    raw = rng.standard_normal(n + 4 * width)
    kernel = np.exp(-0.5 * (np.arange(-2 * width, 2 * width + 1) / width) ** 2)
    out = np.convolve(raw, kernel / np.sqrt((kernel ** 2).sum()), mode="same")[2 * width:2 * width + n]
    return out
