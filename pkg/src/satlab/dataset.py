"""Balanced random 3-SAT datasets: build, write, reload.

A dataset is a directory of DIMACS files plus a ``manifest.json`` that
records the generation spec and, per instance, its relative path, oracle
label, generator seed, and the attempt index that produced it. Datasets are
exactly half SAT and half UNSAT by rejection sampling against the DPLL
oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cnf import CnfFormula, generate_random_3sat, parse_dimacs, write_dimacs
from .oracle import SAT, UNSAT, dpll_sat

ATTEMPT_BUDGET_FACTOR = 1000


class DatasetBudgetError(RuntimeError):
    """Rejection sampling exhausted its attempt budget before balancing."""

    def __init__(self, attempts: int, sat_found: int, unsat_found: int, count: int):
        self.attempts = attempts
        self.sat_found = sat_found
        self.unsat_found = unsat_found
        super().__init__(
            f"gave up after {attempts} attempts: found {sat_found} SAT and "
            f"{unsat_found} UNSAT instances while needing {count // 2} of each"
        )


@dataclass(frozen=True)
class DatasetSpec:
    """Generation parameters; num_clauses is derived, never stored per instance."""

    num_vars: int
    ratio: float
    count: int
    seed: int

    @property
    def num_clauses(self) -> int:
        return round(self.ratio * self.num_vars)


@dataclass(frozen=True)
class DatasetRecord:
    path: str
    label: str
    seed: int
    attempts: int  # 1-based generation attempt that produced this instance


@dataclass(frozen=True)
class BalancedDataset:
    spec: DatasetSpec
    records: tuple[DatasetRecord, ...]
    formulas: tuple[CnfFormula, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.records)


def build_balanced_dataset(
    num_vars: int,
    ratio: float,
    count: int,
    seed: int,
    attempt_budget: int | None = None,
) -> BalancedDataset:
    """Rejection-sample a dataset with exactly count/2 SAT and count/2 UNSAT.

    Candidate instances are generated from per-attempt seeds drawn off a
    master PCG64 stream, labeled with the DPLL oracle, and accepted in
    generation order until both class quotas fill. Exceeding the attempt
    budget (default 1000 x count) raises :class:`DatasetBudgetError` with
    the class counts seen so far; the build never silently truncates.
    """
    if count <= 0 or count % 2 != 0:
        raise ValueError(f"count must be a positive even integer, got {count}")
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    spec = DatasetSpec(num_vars=num_vars, ratio=float(ratio), count=count, seed=seed)
    budget = ATTEMPT_BUDGET_FACTOR * count if attempt_budget is None else attempt_budget
    quota = count // 2
    master = np.random.default_rng(seed)

    records: list[DatasetRecord] = []
    formulas: list[CnfFormula] = []
    found = {SAT: 0, UNSAT: 0}
    for attempt in range(1, budget + 1):
        inst_seed = int(master.integers(1 << 63))
        formula = generate_random_3sat(num_vars, spec.num_clauses, inst_seed)
        label = SAT if dpll_sat(formula).is_sat else UNSAT
        if found[label] >= quota:
            continue
        found[label] += 1
        records.append(
            DatasetRecord(
                path=f"instance_{len(records):04d}.cnf",
                label=label,
                seed=inst_seed,
                attempts=attempt,
            )
        )
        formulas.append(formula)
        if found[SAT] == quota and found[UNSAT] == quota:
            return BalancedDataset(spec, tuple(records), tuple(formulas))
    raise DatasetBudgetError(budget, found[SAT], found[UNSAT], count)


def manifest_json(dataset: BalancedDataset) -> str:
    """Canonical manifest serialization (stable key order, trailing newline)."""
    spec = dataset.spec
    doc = {
        "spec": {
            "num_vars": spec.num_vars,
            "ratio": spec.ratio,
            "count": spec.count,
            "seed": spec.seed,
            "m_max": spec.num_clauses,
        },
        "records": [
            {"path": r.path, "label": r.label, "seed": r.seed, "attempts": r.attempts}
            for r in dataset.records
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_dataset(dataset: BalancedDataset, out_dir: str | Path) -> Path:
    """Write DIMACS files and manifest.json under out_dir; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for record, formula in zip(dataset.records, dataset.formulas):
        (out / record.path).write_text(write_dimacs(formula))
    manifest_path = out / "manifest.json"
    manifest_path.write_text(manifest_json(dataset))
    return manifest_path


def load_dataset(directory: str | Path) -> BalancedDataset:
    """Reload a written dataset; formulas are parsed back from their DIMACS files."""
    root = Path(directory)
    doc = json.loads((root / "manifest.json").read_text())
    spec = DatasetSpec(
        num_vars=int(doc["spec"]["num_vars"]),
        ratio=float(doc["spec"]["ratio"]),
        count=int(doc["spec"]["count"]),
        seed=int(doc["spec"]["seed"]),
    )
    records = tuple(
        DatasetRecord(
            path=str(r["path"]),
            label=str(r["label"]),
            seed=int(r["seed"]),
            attempts=int(r["attempts"]),
        )
        for r in doc["records"]
    )
    formulas = tuple(parse_dimacs((root / r.path).read_text()) for r in records)
    return BalancedDataset(spec, records, formulas)


def measure_sat_fraction(num_vars: int, ratio: float, samples: int, seed: int) -> float:
    """Raw (pre-balancing) SAT frequency among random instances at one ratio."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    m = round(ratio * num_vars)
    master = np.random.default_rng(seed)
    hits = 0
    for _ in range(samples):
        inst_seed = int(master.integers(1 << 63))
        if dpll_sat(generate_random_3sat(num_vars, m, inst_seed)).is_sat:
            hits += 1
    return hits / samples
