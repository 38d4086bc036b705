"""Difficulty scoring functions.

Three scorer families, each producing a ScoreTable over a dataset where
higher score = more difficult: per-example loss of a reference model at
a snapshot epoch, learned-epoch (first epoch after which an example
stays correctly classified), and the estimated consistency score from
repeated held-out fold trainings (accuracy or loss variant).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from currlab import nn
from currlab.data import Dataset


class TrainingDiverged(RuntimeError):
    """Reference-model training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for reference-model (scoring) training."""
    epochs: int = 30
    batch_size: int = 32
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-5
    seed: int = 0


@dataclass
class PredictionTrace:
    """Per-epoch clean-evaluation trace: correct and loss are (T, N)."""
    correct: np.ndarray
    loss: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        if self.correct.shape != self.loss.shape:
            raise ValueError("correct/loss shape mismatch")
        if self.correct.shape[1] != len(self.ids):
            raise ValueError("trace width != number of ids")


@dataclass
class ScoreTable:
    dataset_name: str
    method: str
    ids: np.ndarray
    scores: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ids) != len(self.scores):
            raise ValueError("ids/scores length mismatch")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    def score_map(self):
        return dict(zip(self.ids.tolist(), self.scores.tolist()))

    def to_json(self):
        return json.dumps(
            {
                "dataset_name": self.dataset_name,
                "method": self.method,
                "metadata": self.metadata,
                "ids": self.ids.tolist(),
                "scores": self.scores.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(doc["dataset_name"], doc["method"],
                   np.asarray(doc["ids"], dtype=np.int64),
                   np.asarray(doc["scores"], dtype=np.float64),
                   doc.get("metadata", {}))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def _mix_seed(*parts):
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def train_reference(dataset, arch, cfg, trace=False, snapshot_epochs=()):
    """Standard i.i.d. epoch training used by all scorers.

    Returns (model, trace_or_None, snapshots) where snapshots maps epoch
    -> per-example clean loss vector. Epoch 0 snapshots the untrained
    model. Raises TrainingDiverged on a non-finite training loss.
    """
    n = len(dataset)
    batches_per_epoch = max(1, math.ceil(n / cfg.batch_size))
    total_steps = cfg.epochs * batches_per_epoch
    model = nn.init_model(arch, _mix_seed(cfg.seed, 0xA11))
    opt = nn.OptimizerState.for_model(model, cfg.momentum, cfg.weight_decay, cfg.base_lr)
    rng = np.random.default_rng(_mix_seed(cfg.seed, 0xB22))

    snapshots = {}
    if 0 in snapshot_epochs:
        snapshots[0] = nn.evaluate(model, dataset)[3]
    correct_rows, loss_rows = [], []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            rows = perm[lo:lo + cfg.batch_size]
            step += 1
            lr = nn.cosine_lr(step, total_steps, cfg.base_lr)
            loss, _, grad = nn.loss_and_grad(
                model, nn.Batch(dataset.ids[rows], dataset.inputs[rows],
                                dataset.labels[rows]))
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at step {step}")
            nn.sgd_step(model, opt, grad, lr)
        if trace or epoch in snapshot_epochs:
            _, _, correct, losses = nn.evaluate(model, dataset)
            if trace:
                correct_rows.append(correct.astype(np.uint8))
                loss_rows.append(losses)
            if epoch in snapshot_epochs:
                snapshots[epoch] = losses
    tr = None
    if trace:
        tr = PredictionTrace(np.array(correct_rows), np.array(loss_rows),
                             dataset.ids.copy())
    return model, tr, snapshots


def score_by_loss(dataset, arch, cfg, snapshot_epoch):
    """Clean per-example loss of a freshly trained reference model."""
    if snapshot_epoch < 0 or snapshot_epoch > cfg.epochs:
        raise ValueError("snapshot_epoch must be in [0, epochs]")
    _, _, snaps = train_reference(dataset, arch, cfg,
                                  snapshot_epochs=(snapshot_epoch,))
    return ScoreTable(dataset.name, "loss", dataset.ids.copy(),
                      snaps[snapshot_epoch],
                      {"arch": arch.kind, "epochs": cfg.epochs,
                       "snapshot_epoch": snapshot_epoch, "seed": cfg.seed})


def learned_epochs(correct):
    """c(i) per column of a (T, N) 0/1 matrix.

    c(i) is the smallest t* with correct[t][i]=1 for all t in [t*, T],
    and T+1 if the example is wrong at epoch T.
    """
    correct = np.asarray(correct)
    T = correct.shape[0]
    wrong = correct == 0
    any_wrong = wrong.any(axis=0)
    # last epoch (1-based) at which the example was wrong
    last_wrong = np.where(any_wrong, T - 1 - wrong[::-1].argmax(axis=0) + 1, 0)
    return last_wrong + 1


def learned_epoch_scores(trace):
    """c(i) plus a tie-break in [0,1): normalized average loss.

    The average loss over epochs is divided by (1 + max average loss)
    before being added to c, so the combined score always refines the
    integer learned-epoch ordering.
    """
    c = learned_epochs(trace.correct).astype(np.float64)
    avg_loss = trace.loss.mean(axis=0)
    denom = 1.0 + float(avg_loss.max()) if len(avg_loss) else 1.0
    return c + avg_loss / denom


def score_by_learned_epoch(dataset, arch, cfg, return_trace=False):
    """Learned-epoch difficulty from one standard training run."""
    _, trace, _ = train_reference(dataset, arch, cfg, trace=True)
    table = ScoreTable(dataset.name, "learned_epoch", dataset.ids.copy(),
                       learned_epoch_scores(trace),
                       {"arch": arch.kind, "epochs": cfg.epochs, "seed": cfg.seed})
    return (table, trace) if return_trace else table


def cscore_folds(n, alpha, repeat_seed):
    """Shuffled contiguous folds covering range(n); ceil(1/alpha) folds."""
    k = math.ceil(1.0 / alpha)
    if k < 2:
        raise ValueError("alpha must give at least 2 folds")
    perm = np.random.default_rng(repeat_seed).permutation(n)
    bounds = [min(n, math.ceil(j * alpha * n)) for j in range(k + 1)]
    bounds[-1] = n
    folds = [perm[bounds[j]:bounds[j + 1]] for j in range(k)]
    if any(len(f) == 0 for f in folds):
        raise ValueError("empty c-score fold; decrease alpha or grow the dataset")
    return folds


def estimate_cscore(dataset, arch, cfg, alpha, r, mode="loss"):
    """Held-out consistency score, averaged over r repeated fold splits.

    mode="loss": held-out per-example loss; mode="acc": held-out
    incorrectness (1 - correct), so higher is harder in both modes.
    """
    if mode not in ("acc", "loss"):
        raise ValueError(f"unknown c-score mode {mode!r}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    n = len(dataset)
    scores = np.zeros(n)
    for k in range(r):
        folds = cscore_folds(n, alpha, _mix_seed(cfg.seed, 0xF01D, k))
        for j, held_out in enumerate(folds):
            train_rows = np.setdiff1d(np.arange(n), held_out)
            fold_cfg = TrainConfig(cfg.epochs, cfg.batch_size, cfg.base_lr,
                                   cfg.momentum, cfg.weight_decay,
                                   _mix_seed(cfg.seed, 0xC5, k, j))
            model, _, _ = train_reference(dataset.subset(train_rows), arch, fold_cfg)
            _, _, correct, losses = nn.evaluate(
                model, dataset.subset(held_out))
            if mode == "loss":
                scores[held_out] += losses / r
            else:
                scores[held_out] += (1.0 - correct.astype(np.float64)) / r
    return ScoreTable(dataset.name, f"cscore_{mode}", dataset.ids.copy(), scores,
                      {"arch": arch.kind, "epochs": cfg.epochs, "alpha": alpha,
                       "r": r, "seed": cfg.seed})


def oracle_score(dataset):
    """ScoreTable straight from a synthetic dataset's oracle difficulty."""
    if dataset.oracle_difficulty is None:
        raise ValueError("oracle unavailable: dataset has no oracle_difficulty")
    return ScoreTable(dataset.name, "oracle", dataset.ids.copy(),
                      dataset.oracle_difficulty.astype(np.float64).copy(), {})
