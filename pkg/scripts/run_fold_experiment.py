#!/usr/bin/env python3
"""Stratified fold-ranking experiment on a synthetic or CSV corpus.

Trains on all out-of-fold records with their true labels, ranks each held-out
fold, writes the rankings, and (optionally) reports top-k overlap against a
reference run. Two runs with the same seed produce byte-identical rankings;
pointing --reference at a previous output directory should report overlap
1.000 on every fold.

    python scripts/run_fold_experiment.py --out runs/a
    python scripts/run_fold_experiment.py --out runs/b --reference runs/a
"""

import argparse
from pathlib import Path

from refscreen.datasets import synthetic_corpus
from refscreen.evaluation import load_dataset_csv, run_fold_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset",
                        help="corpus CSV (ref_id,title,abstract,label); "
                        "default: a synthetic corpus")
    parser.add_argument("--synthetic-n", type=int, default=500)
    parser.add_argument("--synthetic-relevant", type=int, default=50)
    parser.add_argument("--corpus-seed", type=int, default=7)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--seed", type=int, default=42,
                        help="fold assignment seed")
    parser.add_argument("--overlap-k", type=int, default=100)
    parser.add_argument("--out", help="directory for fold rankings")
    parser.add_argument("--reference",
                        help="directory holding reference fold rankings")
    args = parser.parse_args()

    if args.dataset:
        records, truth = load_dataset_csv(args.dataset)
    else:
        records, truth = synthetic_corpus(args.synthetic_n,
                                          args.synthetic_relevant,
                                          seed=args.corpus_seed)

    report = run_fold_experiment(
        records, truth, k=args.k, seed=args.seed,
        out_dir=Path(args.out) if args.out else None,
        reference_dir=Path(args.reference) if args.reference else None,
        overlap_k=args.overlap_k)

    for result in report.results:
        line = f"fold {result.fold}: {len(result.ranking)} records"
        if result.ranking:
            top_ref, top_score = result.ranking[0]
            line += f", top {top_ref} @ {top_score:.4f}"
        if result.overlap is not None:
            line += f", overlap {result.overlap:.3f}"
        print(line)

    overlaps = [o for o in report.overlaps if o is not None]
    if overlaps:
        print(f"mean overlap {sum(overlaps) / len(overlaps):.3f}")
    if args.out:
        print(f"rankings written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
