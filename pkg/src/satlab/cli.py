"""Command-line entry points for dataset builds, training, and sweeps.

Settings resolve in three layers: dataclass defaults, then the JSON file
given with --config, then explicit flags. The train command additionally
reads the config.json stored in its --data directory as the base layer, so
a dataset carries its own experiment settings. Every failure is reported as
a single-line JSON object on stderr with a nonzero exit code so calling
scripts can parse outcomes without scraping tracebacks.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .circuit import AnnealConfig
from .experiments import (
    AnnealSweepConfig,
    ExperimentConfig,
    PhaseSweepConfig,
    eval_run,
    gen_run,
    run_anneal_sweep,
    run_phase_sweep,
    train_run,
)


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage errors through the JSON reporter
        raise CliError(message)


def _layered(args, keys) -> dict:
    doc = {}
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text())
        if not isinstance(loaded, dict):
            raise CliError("config file must hold a JSON object")
        doc.update(loaded)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    return doc


_EXPERIMENT_KEYS = [f.name for f in dataclasses.fields(ExperimentConfig)]
_PHASE_KEYS = [f.name for f in dataclasses.fields(PhaseSweepConfig)]
_SOLVER_KEYS = [
    f.name for f in dataclasses.fields(AnnealConfig) if f.name != "seed"
]
_ANNEAL_KEYS = ["ns", "ratio", "instances", "seed", *_SOLVER_KEYS]


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(_layered(args, _EXPERIMENT_KEYS))


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--num-vars", dest="num_vars", type=int)
    p.add_argument("--ratio", type=float)
    p.add_argument("--train-count", dest="train_count", type=int)
    p.add_argument("--val-count", dest="val_count", type=int)
    p.add_argument("--test-count", dest="test_count", type=int)
    p.add_argument("--variant", choices=["LINEAR", "NONLINEAR"])
    p.add_argument("--s", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument(
        "--compress-edge-labels",
        dest="compress_edge_labels",
        action=argparse.BooleanOptionalAction,
        default=None,
    )
    p.add_argument("--epochs", type=int)
    p.add_argument("--penalty-weight", dest="penalty_weight", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--chunk-size", dest="chunk_size", type=int)


def _cmd_gen(args) -> int:
    summary = gen_run(_experiment_config(args), args.out)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_train(args) -> int:
    # The dataset directory remembers the config that generated it; use that
    # as the base layer so train only needs --data, --out, and overrides.
    doc = {}
    stored = Path(args.data) / "config.json"
    if stored.exists():
        doc.update(json.loads(stored.read_text()))
    doc.update(_layered(args, _EXPERIMENT_KEYS))
    record = train_run(ExperimentConfig.from_mapping(doc), args.data, args.out)
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    result = eval_run(args.checkpoint, args.data, args.split)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(text + "\n")
    print(text)
    return 0


def _cmd_phase_sweep(args) -> int:
    config = PhaseSweepConfig(**_layered(args, _PHASE_KEYS))
    rows = run_phase_sweep(config, args.out)
    print(json.dumps({"out": str(args.out), "points": rows}, indent=2, sort_keys=True))
    return 0


def _parse_ns(value):
    if isinstance(value, str):
        return tuple(int(part) for part in value.split(",") if part.strip())
    return tuple(int(v) for v in value)


def _cmd_anneal_sweep(args) -> int:
    doc = _layered(args, _ANNEAL_KEYS)
    solver_doc = {k: doc.pop(k) for k in list(doc) if k in _SOLVER_KEYS}
    if "ns" in doc:
        doc["ns"] = _parse_ns(doc["ns"])
    config = AnnealSweepConfig(solver=AnnealConfig(**solver_doc), **doc)
    rows = run_anneal_sweep(config, args.out)
    print(json.dumps({"out": str(args.out), "points": rows}, indent=2, sort_keys=True))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="satlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with defaults for this command")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")

    p_gen = sub.add_parser("gen", help="build balanced train/val/test datasets")
    common(p_gen)
    _add_experiment_flags(p_gen)
    p_gen.set_defaults(handler=_cmd_gen)

    p_train = sub.add_parser("train", help="train a classifier on a generated dataset")
    common(p_train)
    p_train.add_argument("--data", required=True, help="directory written by gen")
    _add_experiment_flags(p_train)
    p_train.set_defaults(handler=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p_eval.add_argument("--config", help=argparse.SUPPRESS)
    p_eval.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p_eval.add_argument("--out", help="optional directory for eval.json")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_eval.set_defaults(handler=_cmd_eval)

    p_phase = sub.add_parser("phase-sweep", help="SAT fraction across clause ratios")
    common(p_phase)
    p_phase.add_argument("--num-vars", dest="num_vars", type=int)
    p_phase.add_argument("--ratio-min", dest="ratio_min", type=float)
    p_phase.add_argument("--ratio-max", dest="ratio_max", type=float)
    p_phase.add_argument("--ratio-step", dest="ratio_step", type=float)
    p_phase.add_argument("--samples", type=int)
    p_phase.set_defaults(handler=_cmd_phase_sweep)

    p_anneal = sub.add_parser("anneal-sweep", help="relaxation solver miss rate by size")
    common(p_anneal)
    p_anneal.add_argument("--ns", help="comma-separated instance sizes, e.g. 10,20,40,80")
    p_anneal.add_argument("--ratio", type=float)
    p_anneal.add_argument("--instances", type=int)
    p_anneal.add_argument("--restarts", type=int)
    p_anneal.add_argument("--steps", type=int)
    p_anneal.add_argument("--step-size", dest="step_size", type=float)
    p_anneal.add_argument("--beta-start", dest="beta_start", type=float)
    p_anneal.add_argument("--beta-end", dest="beta_end", type=float)
    p_anneal.add_argument("--noise-start", dest="noise_start", type=float)
    p_anneal.add_argument("--clamp", type=float)
    p_anneal.set_defaults(handler=_cmd_anneal_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except Exception as exc:  # report every failure as machine-readable JSON
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
