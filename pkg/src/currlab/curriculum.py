"""Ordered training with a dynamic training-set size.

At each step t the pool is the first g(t) entries of a class-balanced
ordered index (easiest first for ascending, hardest first for
descending); batches are drawn uniformly from that pool. Standard
training is the degenerate case of a constant full-size pool with a
random order.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from currlab import nn
from currlab.pacing import PacingSpec, eval_pacing, is_standard
from currlab.scoring import PredictionTrace, _mix_seed

ORDERS = ("ascending", "descending", "random")


@dataclass(frozen=True)
class CurriculumConfig:
    order: str
    pacing: PacingSpec
    arch: nn.ArchSpec
    total_steps: int
    batch_size: int = 32
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-5
    eval_every: int = 0  # 0 -> max(1, T // 100)
    seed: int = 0
    with_replacement: bool = False
    trace_every: int = 0  # record a train-set prediction trace every k steps
    record_batches: bool = False

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"unknown order {self.order!r}")
        if self.total_steps < 1 or self.batch_size < 1:
            raise ValueError("total_steps and batch_size must be >= 1")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")

    @property
    def eval_interval(self):
        return self.eval_every or max(1, self.total_steps // 100)


@dataclass
class OrderedIndex:
    permutation: np.ndarray  # row positions into the dataset, easiest-first
    ids: np.ndarray          # example ids along the permutation
    per_class: dict          # class -> row positions in within-class order


@dataclass
class RunRecord:
    config: dict
    steps: list = field(default_factory=list)
    train_set_sizes: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    val_accuracies: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    test_accuracies: list = field(default_factory=list)
    best_val_acc: float = float("nan")
    best_val_step: int = -1
    test_acc_at_best_val: float = float("nan")
    final_train_loss: float = float("nan")
    wall_s: float = 0.0
    seed: int = 0
    status: str = "ok"
    trace: PredictionTrace = None
    batch_ids: list = None
    final_model: nn.Model = None

    def to_doc(self):
        return {
            "config": self.config,
            "series": {
                "step": self.steps,
                "train_set_size": self.train_set_sizes,
                "lr": self.lrs,
                "val_accuracy": self.val_accuracies,
                "val_loss": self.val_losses,
                "test_accuracy": self.test_accuracies,
            },
            "best_val_acc": self.best_val_acc,
            "best_val_step": self.best_val_step,
            "test_acc_at_best_val": self.test_acc_at_best_val,
            "final_train_loss": self.final_train_loss,
            "wall_s": self.wall_s,
            "seed": self.seed,
            "status": self.status,
        }


def order_examples(dataset, score_table, order, seed):
    """Class-balanced ordered index.

    Within each class, ids are sorted by score (ties broken by id
    ascending); classes are then interleaved round-robin in a seeded
    class order, so any prefix is balanced to within one example.
    """
    if order not in ORDERS:
        raise ValueError(f"unknown order {order!r}")
    smap = score_table.score_map()
    missing = [int(i) for i in dataset.ids if int(i) not in smap]
    if missing:
        raise KeyError(f"score table missing ids (first few): {missing[:5]}")
    scores = np.array([smap[int(i)] for i in dataset.ids])
    rng = np.random.default_rng(seed)
    per_class = {}
    for c in range(dataset.num_classes):
        rows = np.flatnonzero(dataset.labels == c)
        if order == "random":
            rows = rng.permutation(rows)
        elif order == "ascending":
            rows = rows[np.lexsort((dataset.ids[rows], scores[rows]))]
        else:
            rows = rows[np.lexsort((dataset.ids[rows], -scores[rows]))]
        per_class[c] = rows
    class_order = rng.permutation(dataset.num_classes)
    queues = [list(per_class[c]) for c in class_order]
    perm = []
    while queues:
        queues = [q for q in queues if q]
        for q in queues:
            if q:
                perm.append(q.pop(0))
    perm = np.array(perm, dtype=np.int64)
    return OrderedIndex(perm, dataset.ids[perm], per_class)


class _PoolSampler:
    """Uniform batches from a growing prefix pool.

    Without replacement: a seeded shuffled pass over the pool, reshuffled
    whenever the pool changes size or the pass is exhausted. Pools
    smaller than the batch size are sampled with replacement.
    """

    def __init__(self, permutation, batch_size, seed, with_replacement=False):
        self.permutation = permutation
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self.with_replacement = with_replacement
        self.pool_size = -1
        self.pass_order = None
        self.cursor = 0

    def next_batch(self, pool_size):
        pool = self.permutation[:pool_size]
        if self.with_replacement or pool_size < self.batch_size:
            return self.rng.choice(pool, size=self.batch_size, replace=True)
        if pool_size != self.pool_size or self.cursor + self.batch_size > pool_size:
            self.pool_size = pool_size
            self.pass_order = self.rng.permutation(pool)
            self.cursor = 0
        batch = self.pass_order[self.cursor:self.cursor + self.batch_size]
        self.cursor += self.batch_size
        return batch


def train_with_curriculum(config, train_set, val_set, test_set, score_table):
    """Algorithm-1 style ordered training; returns a RunRecord."""
    t0 = time.perf_counter()
    pacing = replace(config.pacing, N=len(train_set), T=config.total_steps)
    index = order_examples(train_set, score_table, config.order,
                           _mix_seed(config.seed, 0x0BDE))
    model = nn.init_model(config.arch, _mix_seed(config.seed, 0x1417))
    opt = nn.OptimizerState.for_model(model, config.momentum,
                                      config.weight_decay, config.base_lr)
    sampler = _PoolSampler(index.permutation, config.batch_size,
                           _mix_seed(config.seed, 0x5A3), config.with_replacement)
    rec = RunRecord(config=_config_doc(config, pacing), seed=config.seed)
    if config.record_batches:
        rec.batch_ids = []
    trace_correct, trace_loss = [], []

    T = config.total_steps
    last_loss = float("nan")
    for t in range(1, T + 1):
        size = eval_pacing(pacing, t)
        rows = sampler.next_batch(size)
        if rec.batch_ids is not None:
            rec.batch_ids.append(train_set.ids[rows].copy())
        lr = nn.cosine_lr(t, T, config.base_lr)
        loss, _, grad = nn.loss_and_grad(
            model, nn.Batch(train_set.ids[rows], train_set.inputs[rows],
                            train_set.labels[rows]))
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            rec.status = "failed"
            break
        last_loss = float(loss)
        nn.sgd_step(model, opt, grad, lr)
        if config.trace_every and (t % config.trace_every == 0 or t == T):
            _, _, correct, losses = nn.evaluate(model, train_set)
            trace_correct.append(correct.astype(np.uint8))
            trace_loss.append(losses)
        if t % config.eval_interval == 0 or t == T:
            val_acc, val_loss, _, _ = nn.evaluate(model, val_set)
            test_acc, _, _, _ = nn.evaluate(model, test_set)
            rec.steps.append(t)
            rec.train_set_sizes.append(int(size))
            rec.lrs.append(lr)
            rec.val_accuracies.append(float(val_acc))
            rec.val_losses.append(float(val_loss))
            rec.test_accuracies.append(float(test_acc))

    rec.final_train_loss = last_loss
    if rec.status == "ok" and rec.steps:
        best = int(np.argmax(rec.val_accuracies))
        rec.best_val_acc = rec.val_accuracies[best]
        rec.best_val_step = rec.steps[best]
        rec.test_acc_at_best_val = rec.test_accuracies[best]
    if trace_correct:
        rec.trace = PredictionTrace(np.array(trace_correct),
                                    np.array(trace_loss), train_set.ids.copy())
    rec.wall_s = time.perf_counter() - t0
    rec.final_model = model
    return rec


def train_standard(config, train_set, val_set, test_set, score_table=None):
    """Standard i.i.d. training = constant-N pool with random order."""
    pacing = replace(config.pacing, a=0.0, b=1.0)
    cfg = replace(config, order="random", pacing=pacing)
    if score_table is None:
        from currlab.scoring import ScoreTable
        score_table = ScoreTable(train_set.name, "oracle", train_set.ids.copy(),
                                 np.zeros(len(train_set)), {})
    return train_with_curriculum(cfg, train_set, val_set, test_set, score_table)


def _config_doc(config, pacing):
    return {
        "order": config.order,
        "pacing": {"family": pacing.family, "a": pacing.a, "b": pacing.b,
                   "N": pacing.N, "T": pacing.T},
        "arch": config.arch.kind,
        "total_steps": config.total_steps,
        "batch_size": config.batch_size,
        "base_lr": config.base_lr,
        "momentum": config.momentum,
        "weight_decay": config.weight_decay,
        "eval_every": config.eval_interval,
        "seed": config.seed,
        "with_replacement": config.with_replacement,
    }
