"""Experiment orchestration behind the command-line entry points.

Every run is a pure function of (config, seed) to output files: sub-seeds
for datasets, model init, and per-instance solver streams are all derived
from the master seed in a fixed order, so re-running a command rewrites
manifests, curves, and checkpoints byte for byte. Wall-clock timings live
only in run summaries, which are exempt from that guarantee.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import AnnealConfig, anneal_solve, encode_w
from .cnf import generate_random_3sat
from .dataset import BalancedDataset, build_balanced_dataset, load_dataset, write_dataset
from .gnn import DEFAULT_HIDDEN, DEFAULT_MU, DEFAULT_STATE_DIM, NONLINEAR, GnnModel
from .graph import encode_var_var
from .oracle import dpll_sat
from .plots import render_anneal_png, render_curves_png, render_phase_png
from .training import (
    TrainConfig,
    TrainingExample,
    TrainResult,
    curves_csv,
    evaluate_accuracy,
    example_from_label,
    train,
)

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings for gen/train/eval; one master seed derives the rest."""

    num_vars: int = 20
    ratio: float = 4.4
    train_count: int = 1000
    val_count: int = 200
    test_count: int = 200
    variant: str = NONLINEAR
    s: int = DEFAULT_STATE_DIM
    mu: float = DEFAULT_MU
    hidden: int = DEFAULT_HIDDEN
    compress_edge_labels: bool = False
    epochs: int = 100
    penalty_weight: float = 5.0
    max_iters: int = 50
    tol: float = 1e-6
    chunk_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("num_vars must be positive")
        if self.ratio <= 0:
            raise ValueError("ratio must be positive")
        for name in ("train_count", "val_count", "test_count"):
            count = getattr(self, name)
            if count <= 0 or count % 2:
                raise ValueError(f"{name} must be positive and even, got {count}")

    @property
    def m_max(self) -> int:
        return round(self.ratio * self.num_vars)

    def sub_seeds(self) -> dict[str, int]:
        """Fixed-order derived seeds: one per split, then the model init."""
        master = np.random.default_rng(self.seed)
        names = [*SPLITS, "model"]
        return {name: int(master.integers(1 << 63)) for name in names}

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_mapping(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def gen_run(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Build the three balanced splits under out_dir/{train,val,test}.

    The splits use sub-seeds derived from the master seed; the instance
    seeds recorded across the three manifests are checked to be pairwise
    disjoint so no formula can leak between splits.
    """
    out = Path(out_dir)
    seeds = config.sub_seeds()
    counts = {
        "train": config.train_count,
        "val": config.val_count,
        "test": config.test_count,
    }
    summary = {"out": str(out), "splits": {}}
    seen: dict[int, str] = {}
    for split in SPLITS:
        dataset = build_balanced_dataset(
            num_vars=config.num_vars,
            ratio=config.ratio,
            count=counts[split],
            seed=seeds[split],
        )
        for record in dataset.records:
            if record.seed in seen:
                raise RuntimeError(
                    f"instance seed collision between {seen[record.seed]} and {split}"
                )
            seen[record.seed] = split
        write_dataset(dataset, out / split)
        summary["splits"][split] = {
            "count": counts[split],
            "seed": seeds[split],
            "path": str(out / split),
        }
    (out / "config.json").write_text(config.to_json())
    return summary


def _load_examples(
    dataset: BalancedDataset, m_max: int, compress: bool
) -> list[TrainingExample]:
    return [
        example_from_label(encode_var_var(f, m_max, compress_edge_labels=compress), rec.label)
        for f, rec in zip(dataset.formulas, dataset.records)
    ]


def load_split_examples(
    data_dir: str | Path, split: str, config: ExperimentConfig
) -> list[TrainingExample]:
    dataset = load_dataset(Path(data_dir) / split)
    if dataset.spec.num_vars != config.num_vars:
        raise ValueError(
            f"dataset {split} has num_vars={dataset.spec.num_vars}, config says {config.num_vars}"
        )
    return _load_examples(dataset, config.m_max, config.compress_edge_labels)


def checkpoint_json(model: GnnModel, result: TrainResult, config: ExperimentConfig) -> str:
    doc = {
        "model": model.to_dict(),
        "train_state": result.state,
        "best_epoch": result.best_epoch,
        "best_val_acc": result.best_val_acc,
        "config": dataclasses.asdict(config),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_checkpoint(path: str | Path) -> tuple[GnnModel, dict]:
    doc = json.loads(Path(path).read_text())
    return GnnModel.from_dict(doc["model"]), doc


def train_run(config: ExperimentConfig, data_dir: str | Path, out_dir: str | Path) -> dict:
    """Train on a generated dataset directory; write curves, figure,
    checkpoint, and a run summary. Returns the summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    examples = {
        split: load_split_examples(data_dir, split, config) for split in SPLITS
    }
    seeds = config.sub_seeds()
    model = GnnModel.init(
        config.variant,
        s=config.s,
        edge_feature_dim=examples["train"][0].graph.edge_feature_dim,
        seed=seeds["model"] % (1 << 32),
        mu=config.mu,
        hidden=config.hidden,
    )
    train_config = TrainConfig(
        epochs=config.epochs,
        max_iters=config.max_iters,
        tol=config.tol,
        penalty_weight=config.penalty_weight,
        chunk_size=config.chunk_size,
        seed=config.seed,
    )
    result = train(model, examples["train"], examples["val"], train_config)

    curves_path = out / "curves.csv"
    curves_path.write_text(curves_csv(result.curve))
    figure_path = render_curves_png(result.curve, out / "curves.png")
    checkpoint_path = out / "checkpoint.json"
    checkpoint_path.write_text(checkpoint_json(result.model, result, config))

    metrics = {
        split: evaluate_accuracy(
            result.model,
            examples[split],
            max_iters=config.max_iters,
            tol=config.tol,
            chunk_size=config.chunk_size,
        )
        for split in SPLITS
    }
    record = {
        "config": dataclasses.asdict(config),
        "metrics": {
            split: {
                "accuracy": metrics[split]["accuracy"],
                "loss": metrics[split]["loss"],
                "per_class_accuracy": metrics[split]["per_class_accuracy"],
            }
            for split in SPLITS
        },
        "best_epoch": result.best_epoch,
        "best_val_acc": result.best_val_acc,
        "curves": str(curves_path),
        "figure": str(figure_path),
        "checkpoint": str(checkpoint_path),
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return record


def eval_run(checkpoint_path: str | Path, data_dir: str | Path, split: str = "test") -> dict:
    """Re-evaluate a checkpointed model on one split of a dataset directory."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    model, doc = load_checkpoint(checkpoint_path)
    config = ExperimentConfig.from_mapping(doc["config"])
    examples = load_split_examples(data_dir, split, config)
    metrics = evaluate_accuracy(
        model,
        examples,
        max_iters=config.max_iters,
        tol=config.tol,
        chunk_size=config.chunk_size,
    )
    return {"split": split, "checkpoint": str(checkpoint_path), **metrics}


@dataclass(frozen=True)
class PhaseSweepConfig:
    num_vars: int = 20
    ratio_min: float = 1.0
    ratio_max: float = 10.0
    ratio_step: float = 0.5
    samples: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 1.0 <= self.ratio_min <= self.ratio_max <= 12.0:
            raise ValueError("ratio grid must lie within [1, 12]")
        if self.ratio_step <= 0:
            raise ValueError("ratio_step must be positive")
        if self.samples <= 0:
            raise ValueError("samples must be positive")

    def grid(self) -> list[float]:
        ratios = []
        k = 0
        while True:
            r = self.ratio_min + k * self.ratio_step
            if r > self.ratio_max + 1e-9:
                break
            ratios.append(round(r, 6))
            k += 1
        return ratios


def phase_sweep(config: PhaseSweepConfig) -> list[dict]:
    """Empirical SAT fraction per ratio; one derived seed per grid point."""
    master = np.random.default_rng(config.seed)
    rows = []
    for ratio in config.grid():
        point_seed = int(master.integers(1 << 63))
        m = round(ratio * config.num_vars)
        rng = np.random.default_rng(point_seed)
        hits = 0
        for _ in range(config.samples):
            inst_seed = int(rng.integers(1 << 63))
            if dpll_sat(generate_random_3sat(config.num_vars, m, inst_seed)).is_sat:
                hits += 1
        rows.append(
            {
                "ratio": ratio,
                "samples": config.samples,
                "sat_count": hits,
                "sat_fraction": hits / config.samples,
            }
        )
    return rows


def phase_sweep_csv(rows: list[dict]) -> str:
    lines = ["ratio,samples,sat_count,sat_fraction"]
    for r in rows:
        lines.append(
            f"{float(r['ratio'])!r},{r['samples']},{r['sat_count']},{float(r['sat_fraction'])!r}"
        )
    return "\n".join(lines) + "\n"


def run_phase_sweep(config: PhaseSweepConfig, out_dir: str | Path) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = phase_sweep(config)
    (out / "phase_sweep.csv").write_text(phase_sweep_csv(rows))
    render_phase_png(rows, out / "phase_sweep.png")
    return rows


@dataclass(frozen=True)
class AnnealSweepConfig:
    ns: tuple[int, ...] = (10, 20, 40, 80)
    ratio: float = 4.3
    instances: int = 100  # satisfiable instances collected per point
    seed: int = 0
    solver: AnnealConfig = AnnealConfig()

    def __post_init__(self):
        if not self.ns or any(n < 1 for n in self.ns):
            raise ValueError("ns must be positive instance sizes")
        if self.instances <= 0:
            raise ValueError("instances must be positive")
        if self.ratio <= 0:
            raise ValueError("ratio must be positive")


def anneal_sweep(config: AnnealSweepConfig) -> list[dict]:
    """Miss rate of the annealed solver per instance size.

    Each grid point samples random instances at the configured ratio,
    labels them with the DPLL oracle, and runs the solver on satisfiable
    ones until the quota is collected. The instances column reports the
    total sampled (satisfiable and not); miss_rate is the fraction of the
    satisfiable quota the solver failed to solve.
    """
    master = np.random.default_rng(config.seed)
    rows = []
    for n in config.ns:
        point_seed = int(master.integers(1 << 63))
        m = round(config.ratio * n)
        rng = np.random.default_rng(point_seed)
        sampled = 0
        satisfiable = 0
        solved = 0
        while satisfiable < config.instances:
            inst_seed = int(rng.integers(1 << 63))
            sampled += 1
            formula = generate_random_3sat(n, m, inst_seed)
            if not dpll_sat(formula).is_sat:
                continue
            satisfiable += 1
            solver_seed = int(rng.integers(1 << 63))
            solver = dataclasses.replace(config.solver, seed=solver_seed)
            outcome = anneal_solve(encode_w(formula), solver)
            if outcome.solved:
                solved += 1
        rows.append(
            {
                "n": n,
                "instances": sampled,
                "satisfiable": satisfiable,
                "solved": solved,
                "miss_rate": (satisfiable - solved) / satisfiable,
            }
        )
    return rows


def anneal_sweep_csv(rows: list[dict]) -> str:
    lines = ["n,instances,satisfiable,solved,miss_rate"]
    for r in rows:
        lines.append(
            f"{r['n']},{r['instances']},{r['satisfiable']},{r['solved']},{float(r['miss_rate'])!r}"
        )
    return "\n".join(lines) + "\n"


def run_anneal_sweep(config: AnnealSweepConfig, out_dir: str | Path) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = anneal_sweep(config)
    (out / "anneal_sweep.csv").write_text(anneal_sweep_csv(rows))
    render_anneal_png(rows, out / "anneal_sweep.png")
    return rows
