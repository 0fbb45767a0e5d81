"""Experiment configuration, orchestration and reporting."""
from .config import ExperimentConfig, parse_line, resolve_case
from .report import COLUMNS, ReportRow, ReportTable, emit_report, episode_summary, read_episodes
from .runner import make_env, make_policy, run_experiment, save_trained, train_config
from .seeding import STREAMS, substream, substream_seed

__all__ = ["ExperimentConfig", "parse_line", "resolve_case", "COLUMNS", "ReportRow", "ReportTable", "emit_report",
           "episode_summary", "read_episodes", "make_env", "make_policy", "run_experiment", "save_trained",
           "train_config", "STREAMS", "substream", "substream_seed"]
