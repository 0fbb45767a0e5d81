"""Command-line entry point: ``gridattack {train,attack,evaluate,report}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .attack import AttackConfig
from .errors import GridAttackError, ParseError, ValidationError
from .harness import ExperimentConfig, ReportTable, emit_report, read_episodes, run_experiment, save_trained
from .harness.report import table_csv

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; command-line flags override its fields")
    p.add_argument("--case", help="bundled case name (case6, case14) or path to a case JSON")
    p.add_argument("--profile", help="profile CSV (defaults to the bundled case's profile)")
    p.add_argument("--task", choices=("voltage", "topology"))
    p.add_argument("--agent", choices=("a2c", "dqn", "mpc"))
    p.add_argument("--seeds", type=_seeds, help="comma-separated master seeds, e.g. 0,1,2")
    p.add_argument("--out", help="output directory")


def _attack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--checkpoint", help="policy file, {seed} template or directory of <agent>_seed<k>.json")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--norm", help="0, 2 or inf")
    p.add_argument("--eta", type=float, help="PGD step size (default epsilon/5)")
    p.add_argument("--h", type=float, help="finite-difference spacing")
    p.add_argument("--iters", type=int, help="PGD iterations")
    p.add_argument("--episodes", type=int)
    p.add_argument("--target-line", help="targeted line as FROM-TO, e.g. 3-6")
    p.add_argument("--mpc-horizon", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridattack", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train one learner per seed and save checkpoints")
    _common(p)
    p.add_argument("--steps", type=int, help="environment steps per training run")
    p = sub.add_parser("attack", help="evaluate one attack kind against the no-attack control")
    _common(p)
    _attack_flags(p)
    p.add_argument("--attack", required=True, choices=("none", "random", "distortion", "manipulation"))
    p = sub.add_parser("evaluate", help="evaluate every applicable attack kind")
    _common(p)
    _attack_flags(p)
    p = sub.add_parser("report", help="rebuild report files from an episodes.jsonl")
    p.add_argument("--out", required=True, help="directory holding episodes.jsonl")
    return parser


def config_from_args(args) -> ExperimentConfig:
    doc = ExperimentConfig.from_json(args.config).to_dict() if getattr(args, "config", None) else {}
    for name in ("case", "profile", "task", "agent", "checkpoint", "episodes", "seeds", "out"):
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    if getattr(args, "target_line", None) is not None:
        doc["target_line"] = args.target_line
    if getattr(args, "mpc_horizon", None) is not None:
        doc["mpc_horizon"] = args.mpc_horizon
    if getattr(args, "steps", None) is not None:
        doc["train"] = {**doc.get("train", {}), "steps": args.steps}
    if "task" not in doc and "agent" in doc:
        doc["task"] = "topology" if doc["agent"] == "dqn" else "voltage"
    if "agent" not in doc and "task" in doc:
        doc["agent"] = "dqn" if doc["task"] == "topology" else "a2c"
    attack = dict(doc.get("attack", {}))
    for flag, key in (("epsilon", "epsilon"), ("norm", "norm_p"), ("eta", "eta"), ("h", "h"), ("iters", "max_iters")):
        value = getattr(args, flag, None)
        if value is not None:
            attack[key] = value
    doc["attack"] = AttackConfig.from_dict(attack).to_dict()
    if args.command == "attack":
        doc["attacks"] = [args.attack]
    elif args.command == "evaluate":
        kinds = ["random", "distortion"]
        if doc.get("task", "voltage") == "voltage" and doc.get("target_line") is not None:
            kinds.append("manipulation")
        doc["attacks"] = kinds
    return ExperimentConfig.from_dict(doc)


def _report(out_dir) -> ReportTable:
    out = Path(out_dir)
    table = ReportTable.from_summaries(read_episodes(out / "episodes.jsonl"))
    (out / "report.csv").write_text(table_csv(table))
    return table


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            print(_report(args.out).format())
            return EXIT_OK
        cfg = config_from_args(args)
        if args.command == "train":
            for path in save_trained(cfg, cfg.out or "."):
                print(f"saved {path}")
            return EXIT_OK
        table = run_experiment(cfg)
        print(table.format())
        if cfg.out:
            print(f"report written to {cfg.out}")
        return EXIT_OK
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GridAttackError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
