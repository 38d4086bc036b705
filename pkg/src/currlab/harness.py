"""Sweep orchestration and result persistence.

A sweep runs (ordering x pacing-spec x seed) curriculum runs plus a
block of standard-training replicates into a ResultStore: an append-only
ledger CSV, one JSON document per run, and a manifest carrying the
config hash. Completed run ids are skipped on restart, so an
interrupted sweep resumes to the identical ledger.
"""

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from currlab import data as dat
from currlab import nn, scoring
from currlab.curriculum import CurriculumConfig, train_with_curriculum
from currlab.pacing import FAMILIES, PacingSpec, pacing_grid
from currlab.scoring import ScoreTable, TrainConfig, _mix_seed

LEDGER_COLUMNS = ["run_id", "order", "family", "a", "b", "seed", "steps",
                  "best_val_acc", "test_acc_at_best_val", "final_train_loss",
                  "wall_s"]
DEFAULT_SEEDS = (111, 222, 333)

_TOP_KEYS = {"dataset", "split", "split_seed", "noise", "score", "orderings",
             "pacing", "total_steps", "batch_size", "base_lr", "momentum",
             "weight_decay", "eval_every", "seeds", "arch", "n_standard",
             "workers", "output_dir"}
_DATASET_KEYS = {"kind", "num_classes", "examples_per_class", "input_dim",
                 "margin_range", "seed", "noise_sigma", "path", "images",
                 "labels", "paths"}
_SCORE_KEYS = {"method", "epochs", "batch_size", "snapshot_epoch", "alpha",
               "repeats", "seed"}
_PACING_KEYS = {"families", "a_values", "b_values"}
_ARCH_KEYS = {"kind", "layer_widths", "num_classes", "conv_channels",
              "kernel_size", "pool", "in_shape"}


class ConfigError(ValueError):
    """Invalid or unknown sweep-config contents."""


def _check_keys(doc, allowed, where):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_sweep_config(path_or_doc):
    """Parse and validate a sweep config (path to JSON, or a dict)."""
    if isinstance(path_or_doc, (str, Path)):
        with open(path_or_doc) as fh:
            doc = json.load(fh)
    else:
        doc = dict(path_or_doc)
    _check_keys(doc, _TOP_KEYS, "sweep config")
    _check_keys(doc.get("dataset", {}), _DATASET_KEYS, "dataset")
    _check_keys(doc.get("score", {}), _SCORE_KEYS, "score")
    _check_keys(doc.get("pacing", {}), _PACING_KEYS, "pacing")
    _check_keys(doc.get("arch", {}), _ARCH_KEYS, "arch")
    for req in ("dataset", "score", "arch", "total_steps"):
        if req not in doc:
            raise ConfigError(f"missing required key {req!r}")
    doc.setdefault("split", [0.8, 0.1, 0.1])
    doc.setdefault("split_seed", 0)
    doc.setdefault("orderings", ["ascending", "descending", "random"])
    doc.setdefault("pacing", {})
    doc["pacing"].setdefault("families", list(FAMILIES))
    doc["pacing"].setdefault("a_values", [0.01, 0.1, 0.2, 0.4, 0.8, 1.6])
    doc["pacing"].setdefault("b_values", [0.0025, 0.1, 0.2, 0.4, 0.8])
    doc.setdefault("batch_size", 32)
    doc.setdefault("base_lr", 0.1)
    doc.setdefault("momentum", 0.9)
    doc.setdefault("weight_decay", 5e-5)
    doc.setdefault("eval_every", 0)
    doc.setdefault("seeds", list(DEFAULT_SEEDS))
    seeds = doc["seeds"]
    if not seeds or len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be nonempty and distinct")
    n_specs = (len(doc["pacing"]["families"]) * len(doc["pacing"]["a_values"])
               * len(doc["pacing"]["b_values"]))
    doc.setdefault("n_standard", n_specs * len(seeds))
    doc.setdefault("workers", 1)
    return doc


def config_hash(doc):
    """Hash of the result-affecting part of a sweep config."""
    core = {k: v for k, v in doc.items() if k not in ("workers", "output_dir")}
    return hashlib.sha256(
        json.dumps(core, sort_keys=True).encode()).hexdigest()[:16]


def build_dataset(doc):
    d = doc["dataset"]
    kind = d["kind"]
    if kind == "synthetic":
        spec = dat.SyntheticSpec(d["num_classes"], d["examples_per_class"],
                                 d["input_dim"], tuple(d["margin_range"]),
                                 d["seed"], d.get("noise_sigma", 1.0))
        ds = dat.gen_synthetic(spec)
    elif kind == "clab":
        ds = dat.load_clab(d["path"])
    elif kind == "idx":
        ds = dat.load_idx(d["images"], d["labels"])
    elif kind == "cifar":
        ds = dat.load_cifar_bin(d["paths"])
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    if doc.get("noise"):
        spec = dat.NoiseSpec(doc["noise"]["fraction"], doc["noise"]["seed"])
        ds = dat.inject_label_noise(ds, spec)
    return ds


def build_arch(doc):
    a = doc["arch"]
    kw = dict(kind=a["kind"], num_classes=a["num_classes"])
    if a["kind"] == "mlp":
        kw["layer_widths"] = tuple(a["layer_widths"])
    else:
        kw["conv_channels"] = tuple(a["conv_channels"])
        kw["kernel_size"] = a.get("kernel_size", 3)
        kw["pool"] = tuple(a.get("pool", ()))
        kw["in_shape"] = tuple(a["in_shape"])
    return nn.ArchSpec(**kw)


def compute_score_table(dataset, arch, doc):
    s = doc["score"]
    method = s["method"]
    cfg = TrainConfig(epochs=s.get("epochs", 30),
                      batch_size=s.get("batch_size", 32),
                      seed=s.get("seed", 0))
    if method == "oracle":
        return scoring.oracle_score(dataset)
    if method == "loss":
        return scoring.score_by_loss(dataset, arch, cfg,
                                     s.get("snapshot_epoch", cfg.epochs))
    if method == "learned_epoch":
        return scoring.score_by_learned_epoch(dataset, arch, cfg)
    if method in ("cscore_acc", "cscore_loss"):
        return scoring.estimate_cscore(dataset, arch, cfg,
                                       s.get("alpha", 0.25),
                                       s.get("repeats", 1),
                                       mode=method.split("_")[1])
    raise ConfigError(f"unknown scoring method {method!r}")


class ResultStore:
    """Append-only ledger + per-run documents + manifest."""

    def __init__(self, root):
        self.root = Path(root)
        self.runs_dir = self.root / "runs"
        self.ledger_path = self.root / "ledger.csv"
        self.manifest_path = self.root / "manifest.json"

    def initialize(self, doc):
        self.root.mkdir(parents=True, exist_ok=True)
        self.runs_dir.mkdir(exist_ok=True)
        h = config_hash(doc)
        if self.manifest_path.exists():
            old = json.loads(self.manifest_path.read_text())
            if old["config_hash"] != h:
                raise ConfigError(
                    "store was created by a different config "
                    f"({old['config_hash']} != {h})")
        else:
            self.manifest_path.write_text(json.dumps(
                {"config_hash": h, "ledger_columns": LEDGER_COLUMNS,
                 "version": 1}, sort_keys=True) + "\n")
        if not self.ledger_path.exists():
            with open(self.ledger_path, "w", newline="") as fh:
                csv.writer(fh).writerow(LEDGER_COLUMNS)

    def completed_ids(self):
        if not self.ledger_path.exists():
            return set()
        with open(self.ledger_path, newline="") as fh:
            return {row["run_id"] for row in csv.DictReader(fh)}

    def rows(self):
        with open(self.ledger_path, newline="") as fh:
            return list(csv.DictReader(fh))

    def append(self, row, doc):
        (self.runs_dir / f"{row['run_id']}.json").write_text(
            json.dumps(doc, sort_keys=True) + "\n")
        with open(self.ledger_path, "a", newline="") as fh:
            csv.writer(fh).writerow([row[c] for c in LEDGER_COLUMNS])

    def config_hash(self):
        return json.loads(self.manifest_path.read_text())["config_hash"]


def enumerate_jobs(doc):
    """Deterministic job list: curriculum runs (seed innermost, so ledger
    groups are 3-seed replicates) followed by standard replicates."""
    p = doc["pacing"]
    specs = pacing_grid(p["a_values"], p["b_values"], p["families"],
                        N=1, T=doc["total_steps"])
    jobs = []
    for order in doc["orderings"]:
        for spec in specs:
            for seed in doc["seeds"]:
                rid = (f"{order}_{spec.family}_a{spec.a:g}_b{spec.b:g}_s{seed}")
                jobs.append({"run_id": rid, "order": order, "spec": spec,
                             "seed": seed, "standard": False})
    for i in range(doc["n_standard"]):
        jobs.append({"run_id": f"standard_{i:04d}", "order": "random",
                     "spec": PacingSpec("linear", 0.0, 1.0, 1, doc["total_steps"]),
                     "seed": _mix_seed(0x57D, i), "standard": True})
    return jobs


def _run_job(job, doc, splits, table_json):
    train, val, test = splits
    table = ScoreTable.from_json(table_json)
    cfg = CurriculumConfig(
        order=job["order"], pacing=job["spec"], arch=build_arch(doc),
        total_steps=doc["total_steps"], batch_size=doc["batch_size"],
        base_lr=doc["base_lr"], momentum=doc["momentum"],
        weight_decay=doc["weight_decay"], eval_every=doc["eval_every"],
        seed=job["seed"])
    try:
        rec = train_with_curriculum(cfg, train, val, test, table)
        run_doc = rec.to_doc()
        status = rec.status
    except Exception as exc:  # record the failure, keep the sweep going
        rec = None
        run_doc = {"config": {"order": job["order"]}, "status": "failed",
                   "error": repr(exc)}
        status = "failed"
    fam = "standard" if job["standard"] else job["spec"].family
    a = 0.0 if job["standard"] else job["spec"].a
    b = 1.0 if job["standard"] else job["spec"].b
    row = {
        "run_id": job["run_id"], "order": job["order"], "family": fam,
        "a": a, "b": b, "seed": job["seed"], "steps": doc["total_steps"],
        "best_val_acc": rec.best_val_acc if rec and status == "ok" else "nan",
        "test_acc_at_best_val": (rec.test_acc_at_best_val
                                 if rec and status == "ok" else "nan"),
        "final_train_loss": rec.final_train_loss if rec else "nan",
        "wall_s": round(rec.wall_s, 4) if rec else 0.0,
    }
    run_doc["run_id"] = job["run_id"]
    run_doc["standard"] = job["standard"]
    return row, run_doc


def run_sweep(doc, out_dir, limit=None, workers=None):
    """Execute all pending jobs; returns count of newly completed runs.

    `limit` caps the number of new runs this invocation (handy for smoke
    runs and crash/resume testing). Worker count resolution:
    CURRLAB_WORKERS env var > `workers` arg > config.
    """
    doc = load_sweep_config(doc)
    store = ResultStore(out_dir)
    store.initialize(doc)
    h = config_hash(doc)

    full = build_dataset(doc)
    splits = dat.split(full, doc["split"], doc["split_seed"])
    table_path = store.root / "score_table.json"
    if table_path.exists():
        table = ScoreTable.load(table_path)
    else:
        table = compute_score_table(splits[0], build_arch(doc), doc)
        table.save(table_path)

    done = store.completed_ids()
    pending = [j for j in enumerate_jobs(doc) if j["run_id"] not in done]
    if limit is not None:
        pending = pending[:limit]
    env_workers = os.environ.get("CURRLAB_WORKERS")
    nworkers = int(env_workers) if env_workers else (workers or doc["workers"])

    table_json = table.to_json()
    if nworkers <= 1:
        results = (_run_job(j, doc, splits, table_json) for j in pending)
        for row, run_doc in results:
            run_doc["config_hash"] = h
            store.append(row, run_doc)
    else:
        with ProcessPoolExecutor(max_workers=nworkers) as ex:
            futures = [ex.submit(_run_job, j, doc, splits, table_json)
                       for j in pending]
            for fut in futures:  # submission order keeps the ledger deterministic
                row, run_doc = fut.result()
                run_doc["config_hash"] = h
                store.append(row, run_doc)
    return len(pending)


def _float_rows(rows):
    out = []
    for r in rows:
        r = dict(r)
        for k in ("a", "b", "best_val_acc", "test_acc_at_best_val",
                  "final_train_loss", "wall_s"):
            r[k] = float(r[k])
        r["seed"] = int(r["seed"])
        out.append(r)
    return out


def analyze(store_dir, out_dir, force=False):
    """Emit the report bundle (baselines, best means, heatmaps, summary).

    Refuses ledgers whose run documents carry a different config hash
    than the manifest unless force=True.
    """
    from currlab.analysis import baselines, heatmap_and_best_pacing

    store = ResultStore(store_dir)
    rows = store.rows()
    if not rows:
        raise ValueError("result store is empty")
    if not force:
        h = store.config_hash()
        for row in rows:
            doc = json.loads((store.runs_dir / f"{row['run_id']}.json").read_text())
            if doc.get("config_hash") != h:
                raise ConfigError(
                    f"run {row['run_id']} has mismatched config hash; "
                    "use force=True to analyze anyway")
    rows = [r for r in _float_rows(rows)
            if np.isfinite(r["test_acc_at_best_val"])]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    std = [r for r in rows if r["family"] == "standard"]
    cur = [r for r in rows if r["family"] != "standard"]

    report = {}
    if len(std) >= 3:
        b = baselines([r["test_acc_at_best_val"] for r in std])
        report["baselines"] = b
        with open(out / "baselines.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["statistic", "value"])
            w.writerow(["standard1", b.standard1])
            w.writerow(["standard2", b.standard2])
            w.writerow(["standard3", b.standard3])
            w.writerow(["n_runs", b.n_runs])

    summary_rows = []
    if cur:
        by_order = {}
        for r in cur:
            key = (r["order"], r["family"], r["a"], r["b"])
            by_order.setdefault(key, []).append(r["test_acc_at_best_val"])
        group_means = {k: float(np.mean(v)) for k, v in sorted(by_order.items())}
        best_per_order = {}
        for order in sorted({k[0] for k in group_means}):
            sub = {k: v for k, v in group_means.items() if k[0] == order}
            best = min(sub, key=lambda k: (-sub[k], k))
            best_per_order[order] = (best, sub[best])
        with open(out / "best_by_order.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "family", "a", "b", "mean_test_acc"])
            for order, (key, val) in sorted(best_per_order.items()):
                w.writerow([order, key[1], key[2], key[3], val])
        summary_rows += [(order, val) for order, (_, val)
                         in sorted(best_per_order.items())]

        grids, best = heatmap_and_best_pacing(cur)
        with open(out / "heatmap.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["family", "a", "b", "mean_acc"])
            for fam in sorted(grids):
                g = grids[fam]
                for i, a in enumerate(g.a_values):
                    for j, bb in enumerate(g.b_values):
                        if np.isfinite(g.matrix[i, j]):
                            w.writerow([fam, a, bb, g.matrix[i, j]])
        with open(out / "best_pacing.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["family", "a", "b", "mean_acc"])
            for fam in sorted(best):
                a, bb, v = best[fam]
                w.writerow([fam, a, bb, v])
        report["best_per_order"] = best_per_order

    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "best_mean_test_acc"])
        for order in ("ascending", "descending", "random"):
            match = [v for o, v in summary_rows if o == order]
            w.writerow([order, match[0] if match else "absent"])
        if "baselines" in report:
            b = report["baselines"]
            w.writerow(["standard1", b.standard1])
            w.writerow(["standard2", b.standard2])
            w.writerow(["standard3", b.standard3])
        else:
            for name in ("standard1", "standard2", "standard3"):
                w.writerow([name, "absent"])
    return report
