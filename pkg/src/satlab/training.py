"""Full-batch GNN training with a resilient-propagation step rule.

Training is deterministic given (model init seed, data, config): the
gradient is accumulated over fixed-order chunks of the training set, the
update is the sign-based iRprop- rule (no learning-rate tuning, robust to
the wide loss-scale range the contraction penalty introduces), and the
returned model is the parameter snapshot with the best validation
accuracy. Per-epoch metrics are those of the parameters that produced the
epoch's gradient, i.e. measured before that epoch's update; train_loss
includes the contraction penalty (the optimized objective) while val_loss
is plain cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gnn import (
    CONTRACTION_GUARD,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    NONLINEAR,
    GnnModel,
    GraphBatch,
    batch_sigma,
    cross_entropy,
    loss_and_grads,
    readout_batch,
)
from .graph import VarVarGraph
from .oracle import SAT, UNSAT

SAT_TARGET = (1.0, 0.0)
UNSAT_TARGET = (0.0, 1.0)


@dataclass(frozen=True)
class TrainingExample:
    graph: VarVarGraph
    target: tuple[float, float]  # (1,0) for SAT, (0,1) for UNSAT


def example_from_label(graph: VarVarGraph, label: str) -> TrainingExample:
    if label == SAT:
        return TrainingExample(graph, SAT_TARGET)
    if label == UNSAT:
        return TrainingExample(graph, UNSAT_TARGET)
    raise ValueError(f"unknown label {label!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    max_iters: int = DEFAULT_MAX_ITERS  # fixed-point iteration cap K
    tol: float = DEFAULT_TOL  # fixed-point tolerance eps
    penalty_weight: float = 0.5  # lambda (NONLINEAR only)
    chunk_size: int = 64
    step_init: float = 0.01
    step_grow: float = 1.2
    step_shrink: float = 0.5
    step_min: float = 1e-6
    step_max: float = 1.0
    seed: int = 0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainResult:
    model: GnnModel  # parameters at the best validation accuracy
    curve: list[EpochRecord]
    best_epoch: int
    best_val_acc: float
    state: dict  # everything needed to resume (final params + optimizer)


class IRpropMinus:
    """iRprop-: per-parameter steps grown on stable gradient signs, shrunk
    (and the update skipped) when the sign flips."""

    def __init__(self, model: GnnModel, config: TrainConfig):
        self.config = config
        self.steps = {k: np.full_like(v, config.step_init) for k, v in model.params.items()}
        self.prev = {k: np.zeros_like(v) for k, v in model.params.items()}

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.config
        for k, g in grads.items():
            prod = self.prev[k] * g
            step = self.steps[k]
            step[prod > 0] = np.minimum(step[prod > 0] * c.step_grow, c.step_max)
            step[prod < 0] = np.maximum(step[prod < 0] * c.step_shrink, c.step_min)
            g_eff = np.where(prod < 0, 0.0, g)
            params[k] -= np.sign(g_eff) * step
            self.prev[k] = g_eff

    def state_dict(self) -> dict:
        return {
            "steps": {k: v.tolist() for k, v in self.steps.items()},
            "prev": {k: v.tolist() for k, v in self.prev.items()},
        }

    def load_state(self, doc: dict) -> None:
        for k in self.steps:
            self.steps[k] = np.asarray(doc["steps"][k], dtype=np.float64)
            self.prev[k] = np.asarray(doc["prev"][k], dtype=np.float64)


SIGMA_PROJECT_LIMIT = 0.99  # estimated norm that triggers the projection
SIGMA_PROJECT_TARGET = 0.95  # norm scale restored by rescaling W2


def _max_sigma(model: GnnModel, batches, max_iters: int, tol: float) -> float:
    worst = 0.0
    for batch, _ in batches:
        worst = max(worst, float(batch_sigma(model, batch, max_iters, tol).max()))
    return worst


def _chunked(examples: list[TrainingExample], chunk_size: int):
    batches = []
    for i in range(0, len(examples), chunk_size):
        part = examples[i : i + chunk_size]
        batch = GraphBatch([ex.graph for ex in part])
        targets = np.array([ex.target for ex in part], dtype=np.float64)
        batches.append((batch, targets))
    return batches


def _eval_chunks(model: GnnModel, batches, max_iters: int, tol: float) -> tuple[float, float, dict]:
    """Mean cross-entropy, accuracy, and confusion counts over chunks."""
    total = 0
    ce_sum = 0.0
    confusion = {"sat_as_sat": 0, "sat_as_unsat": 0, "unsat_as_sat": 0, "unsat_as_unsat": 0}
    from .gnn import forward_fixed_point_batch

    for batch, targets in batches:
        fwd = forward_fixed_point_batch(model, batch, max_iters=max_iters, tol=tol)
        probs = readout_batch(model, fwd.states, batch)
        ce_sum += float(cross_entropy(probs, targets).sum())
        pred_sat = probs[:, 0] > probs[:, 1]  # exact tie classifies as UNSAT
        actual_sat = targets[:, 0] > 0.5
        confusion["sat_as_sat"] += int((actual_sat & pred_sat).sum())
        confusion["sat_as_unsat"] += int((actual_sat & ~pred_sat).sum())
        confusion["unsat_as_sat"] += int((~actual_sat & pred_sat).sum())
        confusion["unsat_as_unsat"] += int((~actual_sat & ~pred_sat).sum())
        total += batch.num_graphs
    correct = confusion["sat_as_sat"] + confusion["unsat_as_unsat"]
    return ce_sum / total, correct / total, confusion


def evaluate_accuracy(
    model: GnnModel,
    examples: list[TrainingExample],
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    chunk_size: int = 64,
) -> dict:
    """Argmax classification metrics: overall and per-class accuracy plus
    confusion counts. Ties (exactly equal probabilities) predict UNSAT."""
    if not examples:
        raise ValueError("cannot evaluate on an empty dataset")
    loss_mean, acc, conf = _eval_chunks(
        model, _chunked(examples, chunk_size), max_iters, tol
    )
    sat_total = conf["sat_as_sat"] + conf["sat_as_unsat"]
    unsat_total = conf["unsat_as_sat"] + conf["unsat_as_unsat"]
    return {
        "loss": loss_mean,
        "accuracy": acc,
        "per_class_accuracy": {
            SAT: conf["sat_as_sat"] / sat_total if sat_total else float("nan"),
            UNSAT: conf["unsat_as_unsat"] / unsat_total if unsat_total else float("nan"),
        },
        "confusion": conf,
        "count": sat_total + unsat_total,
    }


def train(
    model: GnnModel,
    train_examples: list[TrainingExample],
    val_examples: list[TrainingExample],
    config: TrainConfig = TrainConfig(),
    state: dict | None = None,
) -> TrainResult:
    """Full-batch training; returns the best-validation-accuracy snapshot.

    Passing ``state`` (the ``state`` field of an earlier TrainResult whose
    config matched) resumes training at the recorded epoch and reproduces
    exactly the curves an uninterrupted run would have produced. A
    non-finite loss or gradient aborts with diagnostics rather than
    continuing from poisoned parameters.
    """
    if config.epochs < 1:
        raise ValueError("epochs must be at least 1")
    if not train_examples or not val_examples:
        raise ValueError("need non-empty training and validation sets")
    work = model.copy()
    opt = IRpropMinus(work, config)
    start_epoch = 1
    best_params = {k: v.copy() for k, v in work.params.items()}
    best_val_acc = -1.0
    best_epoch = 0
    if state is not None:
        work.params = {k: np.asarray(v, dtype=np.float64) for k, v in state["params"].items()}
        opt.load_state(state["optimizer"])
        start_epoch = int(state["epoch"]) + 1
        best_params = {
            k: np.asarray(v, dtype=np.float64) for k, v in state["best_params"].items()
        }
        best_val_acc = float(state["best_val_acc"])
        best_epoch = int(state["best_epoch"])

    train_batches = _chunked(train_examples, config.chunk_size)
    val_batches = _chunked(val_examples, config.chunk_size)
    n_train = len(train_examples)
    curve: list[EpochRecord] = []

    for epoch in range(start_epoch, config.epochs + 1):
        grads = work.zero_grads()
        loss_sum = 0.0
        correct = 0
        for batch, targets in train_batches:
            out = loss_and_grads(
                work,
                batch,
                targets,
                penalty_weight=config.penalty_weight,
                max_iters=config.max_iters,
                tol=config.tol,
            )
            loss_sum += out["loss_sum"]
            correct += out["correct"]
            for k, g in out["grads"].items():
                grads[k] += g
        train_loss = loss_sum / n_train
        if not np.isfinite(train_loss) or any(
            not np.isfinite(g).all() for g in grads.values()
        ):
            raise RuntimeError(
                f"training diverged at epoch {epoch}: loss={train_loss!r}"
            )
        for k in grads:
            grads[k] /= n_train
        train_acc = correct / n_train
        val_loss, val_acc, _ = _eval_chunks(work, val_batches, config.max_iters, config.tol)
        curve.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc))
        if val_acc > best_val_acc:
            best_val_acc = val_acc
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in work.params.items()}
        opt.update(work.params, grads)
        if work.variant == NONLINEAR:
            # Stability backstop: gradients are only defined while each
            # graph's transition map contracts, and sign-based steps can
            # jump the Jacobian norm far past 1 in one epoch, after which
            # the penalty needs many epochs to recover. The estimated norm
            # is exactly proportional to the scale of W2, so an update
            # that crosses the guard is projected back by rescaling W2
            # (re-estimating a few times because the fixed point moves).
            # The hinge penalty stays the primary mechanism below the
            # guard; the projection only catches boundary crossings.
            for _ in range(5):
                smax = _max_sigma(work, train_batches, config.max_iters, config.tol)
                if smax < SIGMA_PROJECT_LIMIT:
                    break
                work.params["W2"] *= SIGMA_PROJECT_TARGET / smax

    best_model = work.copy()
    best_model.params = best_params
    return TrainResult(
        model=best_model,
        curve=curve,
        best_epoch=best_epoch,
        best_val_acc=best_val_acc,
        state={
            "epoch": config.epochs,
            "params": {k: v.tolist() for k, v in work.params.items()},
            "optimizer": opt.state_dict(),
            "best_params": {k: v.tolist() for k, v in best_params.items()},
            "best_val_acc": best_val_acc,
            "best_epoch": best_epoch,
        },
    )


def curves_csv(curve: list[EpochRecord]) -> str:
    lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
    for r in curve:
        lines.append(
            f"{r.epoch},{float(r.train_loss)!r},{float(r.train_acc)!r},"
            f"{float(r.val_loss)!r},{float(r.val_acc)!r}"
        )
    return "\n".join(lines) + "\n"
