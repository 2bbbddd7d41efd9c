"""Tests for experiment orchestration: gen/train/eval runs and the sweeps."""

import json

import numpy as np
import pytest

from satlab.circuit import AnnealConfig
from satlab.experiments import (
    AnnealSweepConfig,
    ExperimentConfig,
    PhaseSweepConfig,
    anneal_sweep,
    anneal_sweep_csv,
    eval_run,
    gen_run,
    load_checkpoint,
    load_split_examples,
    phase_sweep,
    phase_sweep_csv,
    run_anneal_sweep,
    run_phase_sweep,
    train_run,
)
from satlab.gnn import NONLINEAR
from satlab.oracle import SAT
from satlab.training import SAT_TARGET, UNSAT_TARGET

TINY = dict(
    num_vars=8,
    ratio=4.4,
    train_count=6,
    val_count=4,
    test_count=4,
    s=2,
    hidden=4,
    epochs=2,
    chunk_size=4,
)


class TestExperimentConfig:
    def test_m_max(self):
        assert ExperimentConfig(num_vars=20, ratio=4.4).m_max == 88
        assert ExperimentConfig(num_vars=20, ratio=10.0).m_max == 200

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(num_vars=0)
        with pytest.raises(ValueError):
            ExperimentConfig(ratio=0.0)
        with pytest.raises(ValueError):
            ExperimentConfig(train_count=7)
        with pytest.raises(ValueError):
            ExperimentConfig(val_count=-2)

    def test_sub_seeds_deterministic_and_distinct(self):
        cfg = ExperimentConfig(seed=42)
        seeds = cfg.sub_seeds()
        assert list(seeds) == ["train", "val", "test", "model"]
        assert seeds == cfg.sub_seeds()
        assert len(set(seeds.values())) == 4
        assert ExperimentConfig(seed=43).sub_seeds() != seeds

    def test_json_round_trip(self):
        cfg = ExperimentConfig(**TINY, seed=9)
        clone = ExperimentConfig.from_mapping(json.loads(cfg.to_json()))
        assert clone == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_mapping({"num_vars": 8, "learning_rate": 0.1})


class TestGenRun:
    def test_layout_and_balance(self, tmp_path):
        cfg = ExperimentConfig(**TINY, seed=5)
        summary = gen_run(cfg, tmp_path)
        assert set(summary["splits"]) == {"train", "val", "test"}
        for split, count in (("train", 6), ("val", 4), ("test", 4)):
            manifest = json.loads((tmp_path / split / "manifest.json").read_text())
            labels = [r["label"] for r in manifest["records"]]
            assert len(labels) == count
            assert labels.count(SAT) == count // 2
        assert (tmp_path / "config.json").read_text() == cfg.to_json()

    def test_split_instance_seeds_disjoint(self, tmp_path):
        cfg = ExperimentConfig(**TINY, seed=5)
        gen_run(cfg, tmp_path)
        seeds = {}
        for split in ("train", "val", "test"):
            manifest = json.loads((tmp_path / split / "manifest.json").read_text())
            for r in manifest["records"]:
                assert r["seed"] not in seeds
                seeds[r["seed"]] = split

    def test_byte_identical_reruns(self, tmp_path):
        cfg = ExperimentConfig(**TINY, seed=6)
        gen_run(cfg, tmp_path / "a")
        gen_run(cfg, tmp_path / "b")
        for rel in ["config.json", "train/manifest.json", "val/manifest.json"]:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_load_split_examples(self, tmp_path):
        cfg = ExperimentConfig(**TINY, seed=7)
        gen_run(cfg, tmp_path)
        examples = load_split_examples(tmp_path, "val", cfg)
        assert len(examples) == 4
        targets = {ex.target for ex in examples}
        assert targets == {SAT_TARGET, UNSAT_TARGET}
        assert all(ex.graph.m_max == cfg.m_max for ex in examples)

    def test_load_rejects_mismatched_num_vars(self, tmp_path):
        cfg = ExperimentConfig(**TINY, seed=7)
        gen_run(cfg, tmp_path)
        other = ExperimentConfig(**{**TINY, "num_vars": 9}, seed=7)
        with pytest.raises(ValueError):
            load_split_examples(tmp_path, "val", other)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    """One generated dataset plus one trained run, shared across tests."""
    root = tmp_path_factory.mktemp("run")
    cfg = ExperimentConfig(**TINY, seed=11)
    gen_run(cfg, root / "data")
    record = train_run(cfg, root / "data", root / "out")
    return cfg, root, record


class TestTrainRun:
    def test_outputs_exist(self, tiny_run):
        cfg, root, record = tiny_run
        out = root / "out"
        assert (out / "curves.csv").exists()
        assert (out / "curves.png").stat().st_size > 0
        assert (out / "checkpoint.json").exists()
        assert (out / "run.json").exists()

    def test_curve_rows_match_epochs(self, tiny_run):
        cfg, root, record = tiny_run
        lines = (root / "out" / "curves.csv").read_text().strip().split("\n")
        assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
        assert len(lines) == 1 + cfg.epochs

    def test_run_record_schema(self, tiny_run):
        cfg, root, record = tiny_run
        assert set(record["metrics"]) == {"train", "val", "test"}
        for split in record["metrics"]:
            m = record["metrics"][split]
            assert 0.0 <= m["accuracy"] <= 1.0
            assert np.isfinite(m["loss"])
        assert record["config"]["seed"] == 11
        assert record["best_epoch"] >= 1
        on_disk = json.loads((root / "out" / "run.json").read_text())
        assert on_disk["metrics"] == record["metrics"]

    def test_checkpoint_reloads(self, tiny_run):
        cfg, root, record = tiny_run
        model, doc = load_checkpoint(root / "out" / "checkpoint.json")
        assert model.variant == NONLINEAR
        assert model.s == cfg.s
        assert doc["best_epoch"] == record["best_epoch"]
        assert doc["config"]["num_vars"] == cfg.num_vars

    def test_rerun_byte_identical_artifacts(self, tiny_run):
        cfg, root, record = tiny_run
        again = train_run(cfg, root / "data", root / "out2")
        for name in ("curves.csv", "checkpoint.json"):
            assert (root / "out" / name).read_bytes() == (root / "out2" / name).read_bytes()
        assert again["metrics"] == record["metrics"]


class TestEvalRun:
    def test_matches_train_run_metrics(self, tiny_run):
        cfg, root, record = tiny_run
        for split in ("val", "test"):
            result = eval_run(root / "out" / "checkpoint.json", root / "data", split=split)
            assert result["split"] == split
            assert result["accuracy"] == record["metrics"][split]["accuracy"]
            assert result["loss"] == pytest.approx(record["metrics"][split]["loss"])

    def test_invalid_split_rejected(self, tiny_run):
        cfg, root, record = tiny_run
        with pytest.raises(ValueError):
            eval_run(root / "out" / "checkpoint.json", root / "data", split="holdout")


class TestPhaseSweep:
    def test_grid_endpoints_inclusive(self):
        cfg = PhaseSweepConfig(ratio_min=1.0, ratio_max=10.0, ratio_step=0.5)
        grid = cfg.grid()
        assert grid[0] == 1.0
        assert grid[-1] == 10.0
        assert len(grid) == 19

    def test_single_point_grid(self):
        cfg = PhaseSweepConfig(ratio_min=4.3, ratio_max=4.3, ratio_step=1.0)
        assert cfg.grid() == [4.3]

    def test_validation(self):
        with pytest.raises(ValueError):
            PhaseSweepConfig(ratio_min=0.5)
        with pytest.raises(ValueError):
            PhaseSweepConfig(ratio_max=12.5)
        with pytest.raises(ValueError):
            PhaseSweepConfig(ratio_min=5.0, ratio_max=4.0)
        with pytest.raises(ValueError):
            PhaseSweepConfig(ratio_step=0.0)
        with pytest.raises(ValueError):
            PhaseSweepConfig(samples=0)

    def test_rows_schema_and_determinism(self):
        cfg = PhaseSweepConfig(
            num_vars=8, ratio_min=1.0, ratio_max=2.0, ratio_step=0.5, samples=20, seed=3
        )
        rows = phase_sweep(cfg)
        assert [r["ratio"] for r in rows] == [1.0, 1.5, 2.0]
        for r in rows:
            assert r["samples"] == 20
            assert 0 <= r["sat_count"] <= 20
            assert r["sat_fraction"] == r["sat_count"] / 20
        assert phase_sweep(cfg) == rows

    def test_low_ratio_mostly_sat(self):
        cfg = PhaseSweepConfig(
            num_vars=8, ratio_min=1.0, ratio_max=1.0, ratio_step=1.0, samples=30, seed=0
        )
        assert phase_sweep(cfg)[0]["sat_fraction"] > 0.9

    def test_csv_round_trip(self):
        cfg = PhaseSweepConfig(
            num_vars=8, ratio_min=1.0, ratio_max=1.5, ratio_step=0.5, samples=10, seed=1
        )
        rows = phase_sweep(cfg)
        text = phase_sweep_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "ratio,samples,sat_count,sat_fraction"
        parsed = [line.split(",") for line in lines[1:]]
        for fields, row in zip(parsed, rows):
            assert float(fields[0]) == row["ratio"]
            assert int(fields[2]) == row["sat_count"]
            assert float(fields[3]) == row["sat_fraction"]

    def test_run_writes_files(self, tmp_path):
        cfg = PhaseSweepConfig(
            num_vars=8, ratio_min=1.0, ratio_max=1.5, ratio_step=0.5, samples=10, seed=1
        )
        rows = run_phase_sweep(cfg, tmp_path)
        assert (tmp_path / "phase_sweep.csv").read_text() == phase_sweep_csv(rows)
        assert (tmp_path / "phase_sweep.png").stat().st_size > 0


class TestAnnealSweep:
    def test_validation(self):
        with pytest.raises(ValueError):
            AnnealSweepConfig(ns=())
        with pytest.raises(ValueError):
            AnnealSweepConfig(ns=(0,))
        with pytest.raises(ValueError):
            AnnealSweepConfig(instances=0)
        with pytest.raises(ValueError):
            AnnealSweepConfig(ratio=-1.0)

    def test_single_point_row(self):
        cfg = AnnealSweepConfig(
            ns=(6,),
            instances=5,
            seed=2,
            solver=AnnealConfig(restarts=6, steps=200),
        )
        rows = anneal_sweep(cfg)
        assert len(rows) == 1
        row = rows[0]
        assert row["n"] == 6
        assert row["satisfiable"] == 5
        assert row["instances"] >= row["satisfiable"]
        assert 0 <= row["solved"] <= 5
        assert row["miss_rate"] == (5 - row["solved"]) / 5

    def test_deterministic(self):
        cfg = AnnealSweepConfig(
            ns=(6,), instances=4, seed=5, solver=AnnealConfig(restarts=4, steps=150)
        )
        assert anneal_sweep(cfg) == anneal_sweep(cfg)

    def test_csv_and_files(self, tmp_path):
        cfg = AnnealSweepConfig(
            ns=(6,), instances=3, seed=4, solver=AnnealConfig(restarts=4, steps=150)
        )
        rows = run_anneal_sweep(cfg, tmp_path)
        text = (tmp_path / "anneal_sweep.csv").read_text()
        assert text == anneal_sweep_csv(rows)
        assert text.startswith("n,instances,satisfiable,solved,miss_rate")
        assert (tmp_path / "anneal_sweep.png").stat().st_size > 0
