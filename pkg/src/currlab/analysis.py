"""Analysis machinery: rank correlations, implicit-curriculum matrices,
standard-training baselines, best-configuration selection, histograms,
and (a, b) heatmap extraction. Everything here is pure and emits
plot-ready arrays/rows; no rendering."""

import math
from dataclasses import dataclass

import numpy as np

from currlab.scoring import learned_epochs


def fractional_ranks(x):
    """Average (fractional) ranks in [1, n]; ties share their mean rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y):
    """Spearman rho: Pearson correlation of fractional ranks.

    Returns nan when either vector has zero rank variance (constant).
    """
    x, y = np.asarray(x), np.asarray(y)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 2:
        raise ValueError("need at least 2 observations")
    rx, ry = fractional_ranks(x), fractional_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt((rx ** 2).sum() * (ry ** 2).sum())
    if denom == 0.0:
        return float("nan")
    return float((rx * ry).sum() / denom)


def spearman_matrix(tables):
    """Pairwise Spearman matrix of ScoreTables sharing one id universe."""
    if len(tables) < 2:
        raise ValueError("need at least 2 score tables")
    ref = np.sort(tables[0].ids)
    cols = []
    for t in tables:
        if not np.array_equal(np.sort(t.ids), ref):
            raise ValueError("score tables cover different id sets")
        cols.append(t.scores[np.argsort(t.ids, kind="stable")])
    k = len(cols)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = spearman(cols[i], cols[j])
    return out


@dataclass
class LearnedIterMatrix:
    ids: np.ndarray      # row ids, sorted by row-mean learned epoch
    values: np.ndarray   # (examples, runs), entries in [1, T+1]


def learned_iteration_matrix(traces):
    """Learned-epoch value per (example, run), rows sorted by row mean."""
    ref = traces[0].ids
    for t in traces[1:]:
        if not np.array_equal(np.sort(t.ids), np.sort(ref)):
            raise ValueError("traces cover different example universes")
    cols = []
    for t in traces:
        le = learned_epochs(t.correct)
        align = np.argsort(t.ids, kind="stable")
        cols.append(le[align])
    values = np.stack(cols, axis=1).astype(np.float64)
    ids = np.sort(ref)
    order = np.argsort(values.mean(axis=1), kind="stable")
    return LearnedIterMatrix(ids[order], values[order])


@dataclass
class BaselineStats:
    standard1: float
    standard2: float
    standard3: float
    n_runs: int
    group_size: int
    n_dropped: int = 0


def baselines(accuracies, group_size=3):
    """standard1 = global mean; standard2 = max of in-order group means
    (trailing remainder dropped and recorded); standard3 = mean of the
    top three values."""
    acc = np.asarray(list(accuracies), dtype=np.float64)
    if len(acc) < 3:
        raise ValueError("need at least 3 runs for standard3")
    n_groups = len(acc) // group_size
    n_dropped = len(acc) - n_groups * group_size
    groups = acc[:n_groups * group_size].reshape(n_groups, group_size)
    standard2 = float(groups.mean(axis=1).max()) if n_groups else float("nan")
    standard3 = float(np.sort(acc)[-3:].mean())
    return BaselineStats(float(acc.mean()), standard2, standard3,
                         len(acc), group_size, n_dropped)


def select_best(records, seeds_per_group):
    """Group runs by (order, family, a, b); mean test-at-best-val per group.

    Every group must contain exactly seeds_per_group runs. Returns
    (best_key, {key: mean_accuracy}); argmax ties break lexicographically.
    """
    groups = {}
    for r in records:
        cfg = r.config
        key = (cfg["order"], cfg["pacing"]["family"],
               cfg["pacing"]["a"], cfg["pacing"]["b"])
        groups.setdefault(key, []).append(r.test_acc_at_best_val)
    means = {}
    for key, vals in sorted(groups.items()):
        if len(vals) != seeds_per_group:
            raise ValueError(f"group {key} has {len(vals)} runs, "
                             f"expected {seeds_per_group}")
        means[key] = float(np.mean(vals))
    best = min(means, key=lambda k: (-means[k], k))
    return best, means


def score_histogram(table, bins):
    """(counts, edges): equal-width bins over [min, max]; counts sum to N."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if len(table.scores) == 0:
        raise ValueError("empty score table")
    return np.histogram(table.scores, bins=bins)


@dataclass
class HeatmapGrid:
    family: str
    a_values: list
    b_values: list
    matrix: np.ndarray       # (len(a), len(b)) of best seed-mean accuracy
    missing: list            # (a, b) cells with no runs


def heatmap_and_best_pacing(rows, a_values=None, b_values=None):
    """Per-family heatmaps + best (a, b) cell per family.

    `rows` are dicts with keys order, family, a, b, seed,
    test_acc_at_best_val (the ledger row schema). Cell value = best over
    orderings of the seed-mean accuracy.
    """
    cell = {}
    for r in rows:
        key = (r["family"], r["order"], float(r["a"]), float(r["b"]))
        cell.setdefault(key, []).append(float(r["test_acc_at_best_val"]))
    families = sorted({k[0] for k in cell})
    if a_values is None:
        a_values = sorted({k[2] for k in cell})
    if b_values is None:
        b_values = sorted({k[3] for k in cell})
    grids, best = {}, {}
    for fam in families:
        mat = np.full((len(a_values), len(b_values)), np.nan)
        missing = []
        for i, a in enumerate(a_values):
            for j, b in enumerate(b_values):
                vals = [np.mean(v) for (f, o, aa, bb), v in cell.items()
                        if f == fam and aa == a and bb == b]
                if vals:
                    mat[i, j] = max(vals)
                else:
                    missing.append((a, b))
        grids[fam] = HeatmapGrid(fam, list(a_values), list(b_values), mat, missing)
        if np.all(np.isnan(mat)):
            continue
        i, j = np.unravel_index(np.nanargmax(mat), mat.shape)
        best[fam] = (a_values[i], b_values[j], float(mat[i, j]))
    return grids, best
