"""Command-line interface.

Subcommands:
  gen-data     generate a synthetic dataset and write it as CLAB binary
  noise        apply label noise to a CLAB dataset
  score        compute a ScoreTable for a dataset
  sweep        run an (ordering x pacing x seed) sweep from a config file
  analyze      turn a result store into a report bundle
  pacing-plot  export (t, g(t)) pacing curves as CSV
"""

import argparse
import csv
import json
import sys

import numpy as np

from currlab import data as dat
from currlab import harness, scoring
from currlab.pacing import DEFAULT_A, DEFAULT_B, FAMILIES, PacingSpec, schedule_csv_rows


def _fail(msg):
    print(json.dumps({"error": str(msg)}), file=sys.stderr)
    return 1


def _load_dataset(path):
    return dat.load_clab(path)


def cmd_gen_data(args):
    spec = dat.SyntheticSpec(args.classes, args.per_class, args.dim,
                             (args.margin_low, args.margin_high), args.seed,
                             args.sigma)
    dat.save_clab(dat.gen_synthetic(spec), args.out)
    print(f"wrote {args.out}: {args.classes * args.per_class} examples, "
          f"dim {args.dim}, {args.classes} classes")
    return 0


def cmd_noise(args):
    ds = _load_dataset(args.dataset)
    noisy = dat.inject_label_noise(ds, dat.NoiseSpec(args.fraction, args.seed))
    dat.save_clab(noisy, args.out)
    print(f"wrote {args.out}: {int(noisy.noise_mask.sum())} corrupted labels")
    return 0


def cmd_score(args):
    ds = _load_dataset(args.dataset)
    cfg = scoring.TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                              seed=args.seed)
    arch = None
    if args.method != "oracle":
        widths = tuple(int(w) for w in args.hidden.split(",") if w)
        from currlab.nn import ArchSpec
        flat_dim = int(np.prod(ds.inputs.shape[1:]))
        arch = ArchSpec("mlp", ds.num_classes,
                        layer_widths=(flat_dim,) + widths + (ds.num_classes,))
    if args.method == "oracle":
        table = scoring.oracle_score(ds)
    elif args.method == "loss":
        snap = args.snapshot_epoch if args.snapshot_epoch is not None else args.epochs
        table = scoring.score_by_loss(ds, arch, cfg, snap)
    elif args.method == "learned_epoch":
        table = scoring.score_by_learned_epoch(ds, arch, cfg)
    else:  # cscore
        table = scoring.estimate_cscore(ds, arch, cfg, args.alpha,
                                        args.repeats, mode=args.cscore_mode)
    table.save(args.out)
    print(f"wrote {args.out}: method={table.method}, N={len(table.scores)}")
    return 0


def cmd_sweep(args):
    doc = harness.load_sweep_config(args.config)
    out = args.out or doc.get("output_dir")
    if not out:
        raise harness.ConfigError("no output directory (config or --out)")
    if args.seed_list:
        doc["seeds"] = [int(s) for s in args.seed_list.split(",")]
    n = harness.run_sweep(doc, out, limit=args.limit, workers=args.workers)
    print(f"completed {n} new runs in {out}")
    return 0


def cmd_analyze(args):
    harness.analyze(args.store, args.out, force=args.force)
    print(f"wrote report bundle to {args.out}")
    return 0


def cmd_pacing_plot(args):
    families = args.families.split(",") if args.families else list(FAMILIES)
    a_values = ([float(x) for x in args.a_values.split(",")]
                if args.a_values else list(DEFAULT_A))
    b_values = ([float(x) for x in args.b_values.split(",")]
                if args.b_values else list(DEFAULT_B))
    specs = [PacingSpec(f, a, b, args.n, args.steps)
             for f in families for a in a_values for b in b_values]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "a", "b", "t", "size"])
        for row in schedule_csv_rows(specs):
            w.writerow(row)
    print(f"wrote {args.out}: {len(specs)} curves x {args.steps} steps")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="currlab",
                                description="curriculum-learning laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic CLAB dataset")
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--per-class", type=int, default=500)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--margin-low", type=float, default=0.2)
    g.add_argument("--margin-high", type=float, default=3.0)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    g = sub.add_parser("noise", help="apply label noise to a CLAB dataset")
    g.add_argument("dataset")
    g.add_argument("--fraction", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_noise)

    g = sub.add_parser("score", help="compute a difficulty score table")
    g.add_argument("dataset")
    g.add_argument("--method", required=True,
                   choices=["oracle", "loss", "learned_epoch", "cscore"])
    g.add_argument("--cscore-mode", choices=["acc", "loss"], default="loss")
    g.add_argument("--alpha", type=float, default=0.25)
    g.add_argument("--repeats", type=int, default=1)
    g.add_argument("--epochs", type=int, default=30)
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--snapshot-epoch", type=int, default=None)
    g.add_argument("--hidden", default="64",
                   help="comma-separated hidden widths of the reference MLP")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_score)

    g = sub.add_parser("sweep", help="run a sweep from a JSON config")
    g.add_argument("config")
    g.add_argument("--out", default=None)
    g.add_argument("--limit", type=int, default=None)
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--seed-list", default=None,
                   help="comma-separated seeds overriding the config")
    g.set_defaults(func=cmd_sweep)

    g = sub.add_parser("analyze", help="emit a report bundle from a store")
    g.add_argument("store")
    g.add_argument("--out", required=True)
    g.add_argument("--force", action="store_true",
                   help="allow mixed config hashes")
    g.set_defaults(func=cmd_analyze)

    g = sub.add_parser("pacing-plot", help="export pacing curves as CSV")
    g.add_argument("--families", default=None)
    g.add_argument("--a-values", default=None)
    g.add_argument("--b-values", default=None)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--steps", type=int, default=200)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_pacing_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
