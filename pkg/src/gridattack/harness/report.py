"""Aggregate episode records into mean/std tables and write report files."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..attack import ATTACK_KINDS
from ..errors import EmptyReport, ParseError

log = logging.getLogger(__name__)

COLUMNS = ("agent", "attack", "reward_mean", "reward_std", "steps_mean", "steps_std", "margin_mean",
           "margin_std", "episodes", "queries_mean", "ms_per_step_mean")
SLOW_MS = 500.0


def _mean_std(xs) -> tuple[float, float]:
    """Mean and population standard deviation; NaN entries are skipped, all-NaN gives NaN."""
    xs = [float(x) for x in xs if x is not None and not math.isnan(float(x))]
    if not xs:
        return float("nan"), float("nan")
    m = math.fsum(xs) / len(xs)
    return m, math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


def episode_summary(rec) -> dict:
    """Flat per-episode row: the record's summary, its metadata and its step count."""
    return {**rec.summary(), **rec.meta, "n_steps": len(rec.steps)}


@dataclass
class ReportRow:
    agent: str
    attack: str
    reward_mean: float
    reward_std: float
    steps_mean: float
    steps_std: float
    margin_mean: float
    margin_std: float
    episodes: int
    queries_mean: float
    ms_per_step_mean: float

    @property
    def slow(self) -> bool:
        return self.ms_per_step_mean > SLOW_MS


def _order(key):
    agent, attack = key
    return (agent, ATTACK_KINDS.index(attack) if attack in ATTACK_KINDS else len(ATTACK_KINDS), attack)


@dataclass
class ReportTable:
    """One row per (agent, attack kind), statistics over all episodes of all seeds."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_summaries(cls, summaries, meta=None) -> ReportTable:
        groups: dict = {}
        ordered = sorted(summaries, key=lambda d: (d.get("run_seed", 0), d.get("episode", 0)))
        for d in ordered:
            groups.setdefault((d["agent"], d["attack"]), []).append(d)
        rows = []
        for key in sorted(groups, key=_order):
            eps = groups[key]
            r = _mean_std(d["total_reward"] for d in eps)
            s = _mean_std(d["survival_steps"] for d in eps)
            mg = _mean_std(d["max_margin"] for d in eps)
            q = _mean_std(d["queries"] / max(d["n_steps"], 1) for d in eps)[0]
            ms = _mean_std(d["ms_per_step"] for d in eps)[0]
            rows.append(ReportRow(key[0], key[1], r[0], r[1], s[0], s[1], mg[0], mg[1], len(eps), q, ms))
        return cls(rows, dict(meta or {}))

    @classmethod
    def from_records(cls, records, meta=None) -> ReportTable:
        return cls.from_summaries([episode_summary(r) for r in records], meta)

    def row(self, agent: str, attack: str) -> ReportRow:
        for r in self.rows:
            if r.agent == agent and r.attack == attack:
                return r
        raise KeyError((agent, attack))

    def degradation(self, agent: str, attack: str) -> float:
        """Drop in mean episode reward relative to the ``none`` control row."""
        return self.row(agent, "none").reward_mean - self.row(agent, attack).reward_mean

    @property
    def flags(self) -> list[str]:
        return [f"{r.agent}/{r.attack}: mean attack time {r.ms_per_step_mean:.1f} ms per step exceeds "
                f"{SLOW_MS:.0f} ms" for r in self.rows if r.slow]

    def format(self) -> str:
        head = f"{'agent':6} {'attack':13} {'reward':>20} {'steps':>16} {'margin':>18} {'eps':>5} {'q/step':>8} {'ms/step':>9}"
        lines = [head]
        for r in self.rows:
            lines.append(f"{r.agent:6} {r.attack:13} {r.reward_mean:9.4f} +- {r.reward_std:7.4f} "
                         f"{r.steps_mean:7.2f} +- {r.steps_std:5.2f} {r.margin_mean:8.4f} +- {r.margin_std:6.4f} "
                         f"{r.episodes:5d} {r.queries_mean:8.1f} {r.ms_per_step_mean:9.2f}")
        lines += [f"WARNING {f}" for f in self.flags]
        return "\n".join(lines)


def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def table_csv(table: ReportTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in table.rows:
        d = asdict(r)
        w.writerow([d[c] if c in ("agent", "attack") else _num(d[c]) for c in COLUMNS])
    return buf.getvalue()


def _timeseries_csv(rec) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = rec.steps[0]
    n_act = np.size(first.action)
    n_flow = 0 if first.line_flow_p is None else len(first.line_flow_p)
    w.writerow(["t", "reward", "diverged", "queries", "ms"] + [f"action_{k}" for k in range(n_act)]
               + [f"line_p_{k}" for k in range(n_flow)])
    for st in rec.steps:
        flows = [] if st.line_flow_p is None else [_num(v) for v in st.line_flow_p]
        flows += [""] * (n_flow - len(flows))
        w.writerow([st.t, _num(st.reward), int(st.diverged), st.queries, _num(st.ms)]
                   + [_num(v) for v in np.ravel(st.action)] + flows)
    return buf.getvalue()


def emit_report(table: ReportTable, records, out_dir, formats=("csv", "json"), timeseries: int = 1,
                include_steps: bool = False) -> list[Path]:
    """Write ``report.csv``/``report.json``, ``episodes.jsonl`` and per-episode time series.

    ``timeseries`` limits the line-flow files to episode indices below it for
    every (agent, attack, seed). ``include_steps`` stores full per-step logs in
    ``episodes.jsonl``; otherwise each line holds the episode summary.
    Returns the written paths.
    """
    if not table.rows:
        raise EmptyReport("report table has no rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown report format {fmt!r}")
    if "csv" in formats:
        p = out / "report.csv"
        p.write_text(table_csv(table))
        written.append(p)
    if "json" in formats:
        p = out / "report.json"
        doc = {"columns": list(COLUMNS), "rows": [asdict(r) for r in table.rows], "flags": table.flags,
               "meta": table.meta}
        p.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")
        written.append(p)
    records = sorted(records, key=lambda r: (r.meta.get("agent", ""), ATTACK_KINDS.index(r.attack),
                                              r.meta.get("run_seed", 0), r.meta.get("episode", 0)))
    p = out / "episodes.jsonl"
    with p.open("w") as fh:
        for rec in records:
            row = rec.to_dict() if include_steps else episode_summary(rec)
            if include_steps:
                row["n_steps"] = len(rec.steps)
            fh.write(json.dumps(_json_safe(row), sort_keys=True) + "\n")
    written.append(p)
    for rec in records:
        if rec.steps and rec.meta.get("episode", 0) < timeseries:
            name = (f"timeseries_{rec.meta.get('agent', 'agent')}_{rec.attack}_seed{rec.meta.get('run_seed', 0)}"
                    f"_ep{rec.meta.get('episode', 0)}.csv")
            p = out / name
            p.write_text(_timeseries_csv(rec))
            written.append(p)
    for f in table.flags:
        log.warning(f)
    return written


def read_episodes(path) -> list[dict]:
    """Episode summaries back from an ``episodes.jsonl`` file (NaN restored from null)."""
    rows = []
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {n}: {exc.msg}") from None
        for key in ("agent", "attack", "total_reward", "survival_steps", "queries", "ms_per_step", "n_steps"):
            if key not in d:
                raise ParseError(f"{path}: line {n}: missing field {key!r}")
        if d.get("max_margin") is None:
            d["max_margin"] = float("nan")
        rows.append(d)
    return rows
