"""Full-batch training with Adam, early stopping, and experiment drivers.

One training run:

* seeds two independent generator streams (initialization, dropout) from the
  config seed, so runs are reproducible bit-for-bit per kernel backend;
* optimizes masked cross-entropy on the training nodes plus an L2 penalty
  ``weight_decay * sum ||W||_F^2`` over the weight matrices (attention
  vectors are not penalized);
* tracks validation accuracy every epoch, keeps the best parameters
  (accuracy ties broken by lower validation loss), and stops after
  ``patience`` epochs without improvement;
* reports test accuracy of the restored best parameters.

``grid_search``, ``repeat_runs``, and ``random_splits`` drive the
experiment protocols on top of ``train``.
"""

from __future__ import annotations

import itertools
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from bgnn import autodiff as ad
from bgnn import backend
from bgnn.models import (beta_pair, build_context, clone_params, forward,
                         init_params, predict, replace_config,
                         weight_matrix_names)

_LOSS_TREND_WINDOW = 50


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite."""


class Adam:
    """Adam with bias correction (the standard first/second-moment variant)."""

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}

    def step(self, params, grads):
        """Update ``params`` in place from a (possibly partial) grad dict."""
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= (self.learning_rate / correct1) * m / (
                np.sqrt(v / correct2) + self.eps)


def accuracy(logits, labels, mask):
    """Fraction of masked nodes whose argmax matches the label."""
    if mask.size == 0:
        raise ValueError("accuracy over an empty mask")
    return float((logits[mask].argmax(axis=1) == labels[mask]).mean())


def masked_ce_value(logits, labels, mask):
    """Plain-array masked cross-entropy (evaluation; no gradients)."""
    sub = logits[mask]
    shifted = sub - sub.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(mask.size), labels[mask]].mean())


@dataclass
class TrainReport:
    """Everything a run produced, ready for JSONL serialization."""

    config: object
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc: float = -1.0
    best_val_loss: float = float("inf")
    test_acc: float = float("nan")
    stopped_epoch: int = 0
    wall_time_s: float = 0.0
    kernel_backend: str = ""
    params: dict = field(default_factory=dict)

    def summary(self):
        from bgnn.models import config_to_dict
        return {
            "event": "summary",
            "config": config_to_dict(self.config),
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "best_val_loss": self.best_val_loss,
            "test_acc": self.test_acc,
            "stopped_epoch": self.stopped_epoch,
            "wall_time_s": self.wall_time_s,
            "kernel_backend": self.kernel_backend,
        }

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.epochs:
                fh.write(json.dumps({"event": "epoch", **record}, sort_keys=True))
                fh.write("\n")
            fh.write(json.dumps(self.summary(), sort_keys=True))
            fh.write("\n")


def _warn_if_loss_rising(losses, seed):
    """Advisory monitor: a healthy run's loss falls on average early on."""
    window = losses[:_LOSS_TREND_WINDOW]
    if len(window) >= 2 and float(np.mean(np.diff(window))) > 0.0:
        warnings.warn(f"training loss increased on average over the first "
                      f"{len(window)} epochs (seed {seed})",
                      RuntimeWarning, stacklevel=3)


def _l2_penalty(pvars):
    total = None
    for name in weight_matrix_names(pvars):
        term = ad.frobenius_sq(pvars[name])
        total = term if total is None else ad.add_scaled(total, term, 1.0, 1.0)
    return total


def train(cfg, data, log_path=None):
    """Run one full training loop and return its :class:`TrainReport`."""
    start = time.perf_counter()
    init_seq, dropout_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.default_rng(init_seq)
    dropout_rng = np.random.default_rng(dropout_seq)

    ctx = build_context(data.adjacency, cfg)
    features = ad.as_matrix(data.features)
    labels = data.labels
    params = init_params(cfg, data.num_features, data.num_classes, init_rng)
    optimizer = Adam(params, cfg.learning_rate)

    report = TrainReport(config=cfg, kernel_backend=backend.active())
    epochs_since_best = 0
    best_params = clone_params(params)

    for epoch in range(1, cfg.max_epochs + 1):
        tape = ad.Tape()
        pvars = {name: tape.variable(arr) for name, arr in params.items()}
        x = tape.constant(features)
        logits = forward(cfg, pvars, ctx, x, rng=dropout_rng, training=True)
        loss = ad.masked_cross_entropy(logits, labels, data.train_mask)
        if cfg.weight_decay > 0.0:
            loss = ad.add_scaled(loss, _l2_penalty(pvars), 1.0, cfg.weight_decay)
        train_loss = float(loss.value[0, 0])
        if not np.isfinite(train_loss):
            raise TrainingDiverged(f"epoch {epoch}: training loss is {train_loss}")
        train_acc = accuracy(logits.value, labels, data.train_mask)

        tape.backward(loss)
        grads = {name: var.grad for name, var in pvars.items()
                 if var.grad is not None}
        optimizer.step(params, grads)

        val_logits = predict(cfg, params, ctx, features)
        val_loss = masked_ce_value(val_logits, labels, data.val_mask)
        val_acc = accuracy(val_logits, labels, data.val_mask)

        report.epochs.append({
            "epoch": epoch, "train_loss": train_loss, "train_acc": train_acc,
            "val_loss": val_loss, "val_acc": val_acc,
        })

        improved = (val_acc > report.best_val_acc
                    or (val_acc == report.best_val_acc
                        and val_loss < report.best_val_loss))
        report.stopped_epoch = epoch
        if improved:
            report.best_epoch = epoch
            report.best_val_acc = val_acc
            report.best_val_loss = val_loss
            best_params = clone_params(params)
            epochs_since_best = 0
        else:
            # patience counts tolerated non-improving epochs; 0 stops at the
            # first epoch that fails to improve
            epochs_since_best += 1
            if epochs_since_best >= max(cfg.patience, 1):
                break

    _warn_if_loss_rising([rec["train_loss"] for rec in report.epochs], cfg.seed)

    report.params = best_params
    test_logits = predict(cfg, best_params, ctx, features)
    report.test_acc = accuracy(test_logits, labels, data.test_mask)
    report.wall_time_s = time.perf_counter() - start
    if log_path is not None:
        report.write_jsonl(log_path)
    return report


def evaluate(cfg, params, data, split="test"):
    """Accuracy and cross-entropy of fixed parameters on one split."""
    mask = getattr(data, f"{split}_mask")
    ctx = build_context(data.adjacency, cfg)
    logits = predict(cfg, params, ctx, ad.as_matrix(data.features))
    return {"split": split,
            "accuracy": accuracy(logits, data.labels, mask),
            "loss": masked_ce_value(logits, data.labels, mask)}


# ---------------------------------------------------------------------------
# experiment drivers

@dataclass
class GridSearchResult:
    cells: list
    best_config: object
    best_report: TrainReport


def _run_many(configs, data, workers):
    """Train each config (thread pool when workers > 1, enumeration order)."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda c: train(c, data), configs))
    return [train(cfg, data) for cfg in configs]


def grid_search(base_cfg, data, grid, progress=None, workers=1):
    """Exhaustive search over ``grid`` axes, selected by validation accuracy.

    ``grid`` maps axis names (``weight_decay``, ``dropout``, ``alpha``,
    ``beta``) to value lists; ``beta`` values are scalar second-hop weights
    for two-layer bilinear models. Axes are enumerated in ascending order
    with weight_decay outermost, so accuracy ties resolve toward lower
    weight_decay, then dropout, then alpha, then beta. Cells are
    independent and run on ``workers`` threads; results are aggregated in
    enumeration order, so the selection is deterministic either way.
    """
    axis_order = ("weight_decay", "dropout", "alpha", "beta")
    unknown = set(grid) - set(axis_order)
    if unknown:
        raise ValueError(f"unknown grid axes {sorted(unknown)}")
    axes = [(name, sorted(grid[name])) for name in axis_order if name in grid]
    if not axes:
        raise ValueError("empty grid")

    assignments = []
    configs = []
    for values in itertools.product(*(vals for _, vals in axes)):
        assignment = dict(zip((name for name, _ in axes), values))
        cfg = base_cfg
        for name, value in assignment.items():
            if name == "beta":
                cfg = replace_config(cfg, beta=beta_pair(value))
            else:
                cfg = replace_config(cfg, **{name: value})
        assignments.append(assignment)
        configs.append(cfg)

    reports = _run_many(configs, data, workers)
    cells = []
    best = None
    for assignment, cfg, report in zip(assignments, configs, reports):
        cell = {**assignment,
                "val_acc": report.best_val_acc,
                "val_loss": report.best_val_loss,
                "test_acc": report.test_acc,
                "best_epoch": report.best_epoch,
                "stopped_epoch": report.stopped_epoch}
        cells.append(cell)
        if progress is not None:
            progress(cell)
        if best is None or report.best_val_acc > best[1].best_val_acc:
            best = (cfg, report)
    return GridSearchResult(cells=cells, best_config=best[0], best_report=best[1])


def repeat_runs(cfg, data, seeds, workers=1):
    """Train once per seed; report mean and sample standard deviation."""
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"seeds must be distinct, got {seeds}")
    if not seeds:
        raise ValueError("repeat_runs needs at least one seed")
    configs = [replace_config(cfg, seed=s) for s in seeds]
    reports = _run_many(configs, data, workers)
    accs = np.array([r.test_acc for r in reports])
    std = float(accs.std(ddof=1)) if len(seeds) > 1 else 0.0
    return {"seeds": seeds,
            "test_accs": [float(a) for a in accs],
            "mean_test_acc": float(accs.mean()),
            "std_test_acc": std,
            "reports": reports}


def random_splits(data, num_splits, seed, per_class=20):
    """Datasets with resampled training nodes (val/test splits stay fixed).

    Each split draws ``per_class`` training nodes per class uniformly from
    the nodes outside the validation and test sets.
    """
    rng = np.random.default_rng(seed)
    excluded = np.union1d(data.val_mask, data.test_mask)
    out = []
    for _ in range(num_splits):
        chosen = []
        for cls in range(data.num_classes):
            pool = np.setdiff1d(np.nonzero(data.labels == cls)[0], excluded)
            if pool.size < per_class:
                raise ValueError(f"class {cls}: only {pool.size} candidate "
                                 f"training nodes, need {per_class}")
            chosen.append(rng.choice(pool, size=per_class, replace=False))
        out.append(data.with_train_mask(np.concatenate(chosen)))
    return out
