#!/usr/bin/env python3
"""Vote-size grid search across several embedding providers, then aggregate.

Runs the k sweep once per provider (here: independent hash-embedder seeds
standing in for distinct encoders), averages accuracy and macro-F1 per k,
and reports the argmax. Writes one CSV per provider plus the aggregate CSV
and an SVG chart.
"""

from __future__ import annotations

import argparse
import os

from simquery.dataset import SamplingPlan, load_dataset, sample_balanced
from simquery.embedding import embed_dataset
from simquery.index import build_index
from simquery.sweep import aggregate_sweeps, sweep_k, sweep_plot_svg, sweep_rows_to_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train", default="data/train.jsonl")
    ap.add_argument("--test", default="data/test.jsonl")
    ap.add_argument("--out-dir", default="results/sweep")
    ap.add_argument("--providers", type=int, default=5, help="number of hash-embedder seeds")
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--shots", type=int, default=31)
    ap.add_argument("--k-min", type=int, default=1)
    ap.add_argument("--k-max", type=int, default=75)
    ap.add_argument("--step", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    train = load_dataset(args.train)
    test = load_dataset(args.test)
    indexed = sample_balanced(train, SamplingPlan(shots_per_class=args.shots, seed=args.seed))

    tables = []
    for p in range(args.providers):
        provider_seed = 1000 + p
        train_store = embed_dataset(indexed, args.dim, provider_seed,
                                    provider_name=f"test-hash-{provider_seed}")
        test_store = embed_dataset(test, args.dim, provider_seed,
                                   provider_name=f"test-hash-{provider_seed}")
        ix = build_index(indexed, train_store)
        rows = sweep_k(ix, test, test_store, args.k_min, args.k_max, args.step)
        tables.append(rows)
        out = os.path.join(args.out_dir, f"sweep.provider{provider_seed}.csv")
        with open(out, "w", encoding="utf-8") as f:
            f.write(sweep_rows_to_csv(rows))
        best = max(rows, key=lambda r: (r.accuracy, -r.k))
        print(f"provider test-hash-{provider_seed}: best k={best.k} accuracy={best.accuracy:.3f}")

    agg = aggregate_sweeps(tables)
    agg_csv = os.path.join(args.out_dir, "sweep.aggregate.csv")
    with open(agg_csv, "w", encoding="utf-8") as f:
        f.write("k,mean_accuracy,mean_macro_f1\n")
        for row in agg.rows:
            f.write(f"{row.k},{row.mean_accuracy!r},{row.mean_macro_f1!r}\n")
    # reuse the plot with the aggregate values in the accuracy/f1 slots
    from simquery.sweep import SweepRow

    plot_rows = [
        SweepRow(k=r.k, accuracy=r.mean_accuracy, macro_f1=r.mean_macro_f1, tie_rate=0.0)
        for r in agg.rows
    ]
    with open(os.path.join(args.out_dir, "sweep.aggregate.svg"), "w", encoding="utf-8") as f:
        f.write(sweep_plot_svg(plot_rows, title="mean accuracy and macro-F1 by k"))
    print(f"aggregate: best k by accuracy = {agg.best_k_accuracy}, "
          f"by macro-F1 = {agg.best_k_macro_f1}")
    print(f"wrote {agg_csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
