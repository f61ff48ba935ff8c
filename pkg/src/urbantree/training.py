"""Training loop, evaluation, stratified cross-validation and grid sweeps.

The checkpoint kept from a run is the one with the smallest validation loss
over at most ``max_epochs`` epochs; there is no early stopping.
"""

import csv
import itertools
import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import model as M
from .augment import AugmentParams, augment
from .checkpoint import Checkpoint
from .data.splits import stratified_kfold_indices, stratified_split_indices
from .layers import per_example_cross_entropy
from .metrics import RESULT_COLUMNS, EvalReport, confusion_matrix, mean_report
from .optimizers import Optimizer
from .rng import substream

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: M.ModelSpec = field(default_factory=M.ModelSpec)
    optimizer: str = "sgd"
    optimizer_hyper: dict = field(default_factory=dict)
    max_epochs: int = 100
    batch_size: int = 32
    class_weighting: str = "none"
    seed: int = 0
    augmentation: AugmentParams = None
    eval_batch_size: int = 128

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("max_epochs and batch_size must be at least 1")
        if self.class_weighting not in ("none", "balanced"):
            raise ValueError(f"class_weighting must be 'none' or 'balanced', got {self.class_weighting!r}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")

    def dumps(self):
        return "".join(
            json.dumps({"epoch": e.epoch, "train_loss": e.train_loss,
                        "val_loss": e.val_loss, "val_accuracy": e.val_accuracy}) + "\n"
            for e in self.epochs
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def class_weights_for(config, dataset):
    if config.class_weighting == "balanced":
        return M.compute_class_weights(dataset.class_counts()).astype(np.float32)
    return None


def predict_logits(spec, params, images, batch_size=128):
    out = [M.forward(spec, params, images[i:i + batch_size]) for i in range(0, len(images), batch_size)]
    return np.concatenate(out)


def _loss_and_accuracy(spec, params, dataset, class_weights, batch_size):
    logits = predict_logits(spec, params, dataset.images, batch_size)
    losses = per_example_cross_entropy(logits, dataset.labels, class_weights)
    return float(np.mean(losses, dtype=np.float64)), logits


def _check_dataset(spec, dataset, name):
    if len(dataset) == 0:
        raise ValueError(f"{name} split is empty")
    if tuple(dataset.images.shape[1:]) != spec.input_shape:
        raise ValueError(f"{name} images have shape {dataset.images.shape[1:]}, model expects {spec.input_shape}")
    if dataset.labels.max() >= spec.n_classes:
        raise ValueError(f"{name} labels exceed the model's {spec.n_classes} classes")


def train(config, train_set, val_set, out_dir=None):
    """Train from scratch; return ``(best Checkpoint, TrainHistory)``.

    Data order, dropout masks and augmentation draws all derive from
    ``config.seed``, so a run is reproducible. With ``out_dir`` the best
    checkpoint and the per-epoch history are written there as the run goes.
    """
    spec = config.model
    _check_dataset(spec, train_set, "train")
    _check_dataset(spec, val_set, "validation")
    weights = class_weights_for(config, train_set)
    seed = config.seed

    params = M.build(spec, seed)
    opt = Optimizer(config.optimizer, config.optimizer_hyper, M.flat_params(params))
    history = TrainHistory()
    best = None
    n = len(train_set)

    for epoch in range(1, config.max_epochs + 1):
        order = substream(seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            x = train_set.images[idx]
            if config.augmentation is not None:
                x = np.stack([
                    augment(img, config.augmentation, substream(seed, "augment", epoch, int(i)))
                    for img, i in zip(x, idx)
                ]).astype(np.float32)
            loss, grads, _ = M.loss_and_grads(
                spec, params, x, train_set.labels[idx], weights,
                training=True, rng=substream(seed, "dropout", epoch, b),
            )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}, batch {b}")
            params = M.with_flat_params(params, opt.step(M.flat_params(params), grads))
            total += float(loss) * len(idx)

        val_loss, logits = _loss_and_accuracy(spec, params, val_set, weights, config.eval_batch_size)
        val_acc = float(np.mean(logits.argmax(axis=1) == val_set.labels))
        history.epochs.append(EpochRecord(epoch, total / n, val_loss, val_acc))
        log.info("epoch %d train_loss %.4f val_loss %.4f val_acc %.4f", epoch, total / n, val_loss, val_acc)

        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best = Checkpoint(spec, [M.Layer(l.name, l.weights.copy(), l.bias.copy()) for l in params],
                              seed, epoch, val_loss, list(train_set.class_names))
            if out_dir:
                best.save(os.path.join(out_dir, "checkpoint.bin"))
        if out_dir:
            history.save(os.path.join(out_dir, "history.jsonl"))

    if best is None:
        raise TrainingError("validation loss was never finite; no checkpoint saved")
    return best, history


def evaluate(checkpoint, test_set, class_weights=None, batch_size=128):
    """Single inference pass over ``test_set``; returns an :class:`EvalReport`."""
    spec = checkpoint.spec
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    labels = test_set.labels
    if checkpoint.class_names and test_set.class_names:
        index = {s: i for i, s in enumerate(checkpoint.class_names)}
        present = sorted({test_set.class_names[i] for i in np.unique(labels)})
        unknown = [s for s in present if s not in index]
        if unknown:
            raise ValueError(f"test set contains species absent from training: {unknown}")
        remap = np.array([index.get(s, -1) for s in test_set.class_names])
        labels = remap[labels]
    elif labels.max() >= spec.n_classes:
        raise ValueError(f"test labels exceed the model's {spec.n_classes} classes")

    logits = predict_logits(spec, checkpoint.params, test_set.images, batch_size)
    loss = float(np.mean(per_example_cross_entropy(logits, labels, class_weights), dtype=np.float64))
    cm = confusion_matrix(labels, logits.argmax(axis=1), spec.n_classes)
    return EvalReport.from_confusion(cm, loss, checkpoint.epoch)


@dataclass
class CVResult:
    folds: list
    aggregate: EvalReport


def cross_validate(config, dataset, k=5, val_fraction=0.2):
    """Stratified k-fold: train on k-1 folds, evaluate on the held-out fold.

    Each run's checkpoint is chosen on a stratified ``val_fraction`` slice of
    its training folds, so the held-out fold is never seen during training.
    The aggregate is the unweighted mean over folds, with loss reported as
    not applicable (NaN).
    """
    fold_of = stratified_kfold_indices(dataset.labels, k, config.seed)
    reports = []
    for i in range(k):
        try:
            rest = np.flatnonzero(fold_of != i)
            fold_seed = int(substream(config.seed, "cv", i).integers(2 ** 31))
            inner = stratified_split_indices(dataset.labels[rest], (1 - val_fraction, val_fraction),
                                             fold_seed, min_per_class=2)
            tr, va = dataset.subset(rest[inner == 0]), dataset.subset(rest[inner == 1])
            ckpt, _ = train(config, tr, va)
            reports.append(evaluate(ckpt, dataset.subset(np.flatnonzero(fold_of == i)),
                                    class_weights_for(config, tr)))
        except Exception as exc:
            raise TrainingError(f"cross-validation fold {i}: {exc}") from exc
    return CVResult(reports, mean_report(reports))


GRID_KEYS = {
    "blocks": "n_blocks",
    "n_blocks": "n_blocks",
    "optimizer": "optimizer",
    "initializer": "initializer",
    "dropout": "dropout_rate",
    "dropout_rate": "dropout_rate",
    "class_weighting": "class_weighting",
    "weighting": "class_weighting",
    "kernel_size": "kernel_size",
    "kernel": "kernel_size",
}


def expand_grid(grid):
    """Cartesian product of ``{key: [values]}`` as a list of dicts with canonical keys."""
    if not grid:
        raise ValueError("empty sweep grid")
    keys = []
    for key in grid:
        if key not in GRID_KEYS:
            raise ValueError(f"unknown grid key {key!r}; choose from {', '.join(sorted(GRID_KEYS))}")
        keys.append(GRID_KEYS[key])
    values = [list(v) for v in grid.values()]
    if any(not v for v in values):
        raise ValueError("every grid key needs at least one value")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def apply_overrides(config, overrides):
    """A copy of ``config`` with grid-style overrides applied."""
    model_fields = {}
    top = {}
    for key, val in overrides.items():
        if key in ("n_blocks", "dropout_rate", "kernel_size", "initializer"):
            model_fields[key] = val
        else:
            top[key] = val
    spec = config.model
    if "n_blocks" in model_fields:
        n = int(model_fields["n_blocks"])
        model_fields["n_blocks"] = n
        if len(spec.filters_per_block) != n:
            model_fields["filters_per_block"] = None
    if "dropout_rate" in model_fields:
        model_fields["dropout_rate"] = float(model_fields["dropout_rate"])
    if "kernel_size" in model_fields:
        model_fields["kernel_size"] = int(model_fields["kernel_size"])
    new_spec = replace(spec, **model_fields) if model_fields else spec
    if "optimizer" in top and top["optimizer"] != config.optimizer:
        top.setdefault("optimizer_hyper", {})
    return replace(config, model=new_spec, **top)


def model_label(config):
    """Results-table style label, e.g. ``x3 Conv block (adamax he_normal)``."""
    spec = config.model
    parts = [f"{config.optimizer} {spec.initializer}"]
    if spec.dropout_rate:
        parts.append(f"{round(100 * spec.dropout_rate)}% dropout")
    if spec.kernel_size != 3:
        parts.append(f"{spec.kernel_size}x{spec.kernel_size} kernel")
    if config.class_weighting == "balanced":
        parts.append("balanced W")
    return f"x{spec.n_blocks} Conv block ({', '.join(parts)})"


@dataclass
class SweepRow:
    label: str
    overrides: dict
    config: TrainConfig
    report: EvalReport = None
    error: str = ""

    @property
    def ok(self):
        return self.report is not None


def sweep(grid, base_config, train_set, val_set, test_set):
    """Train and evaluate every grid combination; rows sorted by test accuracy.

    A failing combination becomes a row with ``error`` set; the sweep goes on.
    """
    rows = []
    for overrides in expand_grid(grid):
        try:
            cfg = apply_overrides(base_config, overrides)
            label = model_label(cfg)
        except Exception as exc:
            rows.append(SweepRow(str(overrides), overrides, base_config, None, str(exc)))
            continue
        try:
            ckpt, _ = train(cfg, train_set, val_set)
            report = evaluate(ckpt, test_set, class_weights_for(cfg, train_set))
            rows.append(SweepRow(label, overrides, cfg, report))
        except Exception as exc:
            log.warning("sweep run %s failed: %s", label, exc)
            rows.append(SweepRow(label, overrides, cfg, None, str(exc)))
    return sorted(rows, key=lambda r: -r.report.accuracy if r.ok else float("inf"))


def result_row(label, report):
    if report is None:
        return {"model": label, "loss": "NA", "accuracy_pct": "NA", "avg_class_recall_pct": "NA",
                "avg_class_precision_pct": "NA", "epochs": "NA"}
    return report.row(label)


def write_results_csv(path, rows):
    """Write ``[(label, EvalReport or None), ...]`` with the results-table header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for label, report in rows:
            writer.writerow(result_row(label, report))


def read_results_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"{path} does not have the results-table header")
        return list(reader)
