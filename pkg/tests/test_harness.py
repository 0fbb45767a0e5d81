import csv
import json
import math

import numpy as np
import pytest

from gridattack.agents import ConstantPolicy, save_policy
from gridattack.cli import build_parser, config_from_args, main
from gridattack.errors import EmptyReport, ParseError, ValidationError
from gridattack.harness import ExperimentConfig, ReportTable, emit_report, read_episodes, run_experiment
from gridattack.harness.report import COLUMNS, SLOW_MS, table_csv
from gridattack.harness.seeding import substream, substream_seed


def small(**kw):
    base = dict(task="voltage", agent="a2c", attacks=("random", "distortion"), episodes=2, seeds=(0, 1))
    return ExperimentConfig(**{**base, **kw})


@pytest.fixture(scope="module")
def a2c_policies(trained):
    return {0: trained("a2c", 0), 1: trained("a2c", 1)}


# --- configuration ---------------------------------------------------------------

@pytest.mark.parametrize("kw, field", [
    (dict(task="topology", agent="mpc"), "agent"),
    (dict(task="voltage", agent="dqn"), "agent"),
    (dict(attacks=("manipulation",)), "target_line"),
    (dict(task="topology", agent="dqn", attacks=("manipulation",), target_line="3-6"), "attacks"),
    (dict(attacks=("teleport",)), "attacks"),
    (dict(episodes=0), "episodes"),
    (dict(seeds=()), "seeds"),
    (dict(seeds=(1, 1)), "seeds"),
    (dict(target_line="x"), "target_line"),
    (dict(case="/tmp/nowhere.json"), "profile"),
])
def test_config_rejects(kw, field):
    with pytest.raises(ValidationError, match=f"ExperimentConfig.{field}"):
        ExperimentConfig(**kw)


def test_config_round_trip_and_unknown_fields(tmp_path):
    cfg = small(attacks=("manipulation",), target_line="3-6")
    p = tmp_path / "cfg.json"
    cfg.save(p)
    assert ExperimentConfig.from_json(p) == cfg
    assert cfg.target_line == (3, 6) and cfg.kinds == ("none", "manipulation")
    with pytest.raises(ValidationError, match="unknown field"):
        ExperimentConfig.from_dict({"agent": "a2c", "epsilon": 0.1})


def test_config_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "agent": "a2c",\n  "episodes": ,\n}\n')
    with pytest.raises(ParseError, match="line 3"):
        ExperimentConfig.from_json(p)
    with pytest.raises(ParseError):
        ExperimentConfig.from_json(tmp_path / "missing.json")


# --- seeding -----------------------------------------------------------------------

def test_substreams_are_independent_and_reproducible():
    a = substream(7, "train").random(5)
    assert np.array_equal(a, substream(7, "train").random(5))
    for other in (substream(7, "attack"), substream(8, "train"), substream(7, "train", 0)):
        assert not np.array_equal(a, other.random(5))
    s = substream_seed(3, "profile", 4)
    assert 0 <= s < 2 ** 63 and s == substream_seed(3, "profile", 4)
    with pytest.raises(KeyError):
        substream(0, "nope")


# --- running and reporting -------------------------------------------------------

def test_run_is_deterministic_and_has_control_row(a2c_policies):
    t1 = run_experiment(small(), a2c_policies)
    t2 = run_experiment(small(), a2c_policies)
    assert [r.attack for r in t1.rows] == ["none", "random", "distortion"]
    strip = lambda t: [(r.agent, r.attack, r.reward_mean, r.reward_std, r.steps_mean, r.queries_mean, r.episodes)
                       for r in t.rows]
    assert strip(t1) == strip(t2)
    assert all(r.episodes == 4 for r in t1.rows)
    assert t1.row("a2c", "distortion").queries_mean == 412.0
    assert t1.degradation("a2c", "none") == 0.0
    t3 = run_experiment(small(attacks=()), a2c_policies)
    assert [r.attack for r in t3.rows] == ["none"]


def test_episode_windows_shared_across_kinds(a2c_policies):
    table = run_experiment(small(attacks=("random",), episodes=3), a2c_policies)
    by = {}
    for rec in table.records:
        by.setdefault((rec.meta["run_seed"], rec.meta["episode"]), []).append(rec)
    for recs in by.values():
        none, rnd = recs
        assert none.seed == rnd.seed
        np.testing.assert_array_equal(none.steps[0].s_clean, rnd.steps[0].s_clean)


def test_report_files_and_recomputation(tmp_path, a2c_policies):
    cfg = small(attacks=("random", "manipulation"), target_line="3-6", out=str(tmp_path / "r"))
    table = run_experiment(cfg, a2c_policies)
    out = tmp_path / "r"
    with open(out / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == COLUMNS
    assert [r[1] for r in rows[1:]] == ["none", "random", "manipulation"]
    doc = json.loads((out / "report.json").read_text())
    assert doc["columns"] == list(COLUMNS) and doc["meta"]["config"]["episodes"] == 2
    again = ReportTable.from_summaries(read_episodes(out / "episodes.jsonl"))
    for a, b in zip(table.rows, again.rows):
        for c in COLUMNS[2:]:
            x, y = getattr(a, c), getattr(b, c)
            assert (math.isnan(x) and math.isnan(y)) or abs(x - y) <= 1e-10
    # one time series per (kind, seed) for episode 0, with the line flows
    series = sorted(p.name for p in out.glob("timeseries_*.csv"))
    assert len(series) == 3 * 2
    head = (out / series[0]).read_text().splitlines()
    assert head[0].startswith("t,reward,diverged,queries,ms,action_0") and "line_p_4" in head[0]
    assert len(head) == 97


def test_report_bytes_stable_apart_from_timing(tmp_path, a2c_policies):
    def run(name):
        run_experiment(small(out=str(tmp_path / name)), a2c_policies)
        rows = [json.loads(line) for line in (tmp_path / name / "episodes.jsonl").read_text().splitlines()]
        for r in rows:
            r.pop("ms_per_step")
        csv_rows = [line.rsplit(",", 1)[0] for line in (tmp_path / name / "report.csv").read_text().splitlines()]
        return rows, csv_rows
    assert run("a") == run("b")


def test_slow_rows_are_flagged():
    base = dict(agent="mpc", total_reward=-1.0, survival_steps=96, max_margin=float("nan"), queries=0,
                n_steps=96, run_seed=0, episode=0)
    table = ReportTable.from_summaries([{**base, "attack": "none", "ms_per_step": 0.0},
                                        {**base, "attack": "distortion", "ms_per_step": SLOW_MS + 1}])
    assert len(table.flags) == 1 and "mpc/distortion" in table.flags[0]
    assert "WARNING" in table.format()
    fast = ReportTable.from_summaries([{**base, "attack": "distortion", "ms_per_step": SLOW_MS}])
    assert fast.flags == []


def test_empty_report_raises(tmp_path):
    with pytest.raises(EmptyReport):
        emit_report(ReportTable(), [], tmp_path)


def test_read_episodes_errors(tmp_path):
    p = tmp_path / "episodes.jsonl"
    p.write_text('{"agent": "a2c"}\n')
    with pytest.raises(ParseError, match="line 1: missing field"):
        read_episodes(p)
    p.write_text("\n{oops\n")
    with pytest.raises(ParseError, match="line 2"):
        read_episodes(p)


class Exploding(ConstantPolicy):
    """Behaves like a do-nothing controller until its query budget runs out."""

    def __init__(self, env, budget):
        super().__init__(env)
        self.budget = budget

    def query(self, s):
        self.budget -= 1
        if self.budget < 0:
            raise RuntimeError("controller crashed")
        return super().query(s)


def test_partial_results_written_on_failure(tmp_path, voltage_env):
    cfg = small(attacks=("random",), seeds=(0,), out=str(tmp_path))
    with pytest.raises(RuntimeError):
        run_experiment(cfg, {0: Exploding(voltage_env, 96 * 3 + 5)})
    rows = read_episodes(tmp_path / "episodes.jsonl")
    assert len(rows) == 3 and [r["attack"] for r in rows] == ["none", "none", "random"]
    assert json.loads((tmp_path / "report.json").read_text())["meta"]["partial"] is True


# --- command line ----------------------------------------------------------------

def test_cli_flags_build_config():
    args = build_parser().parse_args(["evaluate", "--agent", "a2c", "--target-line", "3-6", "--epsilon", "0.1",
                                      "--norm", "2", "--seeds", "4,5", "--episodes", "3"])
    cfg = config_from_args(args)
    assert cfg.task == "voltage" and cfg.seeds == (4, 5) and cfg.episodes == 3
    assert cfg.attack.epsilon == 0.1 and cfg.attack.norm_p == 2
    assert cfg.kinds == ("none", "random", "distortion", "manipulation")
    args = build_parser().parse_args(["evaluate", "--agent", "dqn"])
    assert config_from_args(args).kinds == ("none", "random", "distortion")


def test_cli_attack_and_report(tmp_path, trained, capsys):
    for seed in (0, 1):
        save_policy(trained("a2c", seed), tmp_path / f"a2c_seed{seed}.json")
    out = tmp_path / "out"
    code = main(["attack", "--agent", "a2c", "--checkpoint", str(tmp_path), "--attack", "distortion",
                 "--episodes", "1", "--seeds", "0,1", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "distortion" in printed and "report written" in printed
    before = (out / "report.csv").read_text()
    (out / "report.csv").unlink()
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "report.csv").read_text() == before


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["evaluate", "--task", "topology", "--agent", "mpc"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["evaluate", "--config", str(bad)]) == 2
    assert main(["attack", "--agent", "a2c", "--attack", "random", "--epsilon", "-1"]) == 2
    assert main(["report", "--out", str(tmp_path)]) == 2
    assert main(["attack", "--agent", "a2c", "--attack", "none", "--episodes", "1", "--seeds", "0",
                 "--checkpoint", str(tmp_path / "absent.json")]) == 3
    err = capsys.readouterr().err
    assert err.count("error:") == 5


def test_cli_train_writes_checkpoints(tmp_path):
    assert main(["train", "--agent", "dqn", "--steps", "300", "--seeds", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dqn_seed0.json").exists()
    code = main(["attack", "--agent", "dqn", "--attack", "random", "--episodes", "1", "--seeds", "0",
                 "--checkpoint", str(tmp_path)])
    assert code == 0
