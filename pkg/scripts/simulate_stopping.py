#!/usr/bin/env python3
"""Recall calibration for the stopping rules.

Hides a known relevant/irrelevant split, screens it in many random orders,
stops each run when the chosen rule first fires, and reports the fraction of
runs whose recall at the stopping point met the target. The statistical rule
at 95/95 should clear 95% of runs with room to spare; the consecutive rule's
behavior depends entirely on prevalence and run length.

    python scripts/simulate_stopping.py --rule statistical --runs 1000
    python scripts/simulate_stopping.py --rule consecutive --n-consecutive 100
"""

import argparse

from refscreen.stopping import (
    StoppingConfig, random_order, simulate_until_stop,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--total", type=int, default=500,
                        help="corpus size")
    parser.add_argument("--relevant", type=int, default=20,
                        help="hidden relevant count")
    parser.add_argument("--rule", choices=("consecutive", "statistical"),
                        default="statistical")
    parser.add_argument("--n-consecutive", type=int, default=50)
    parser.add_argument("--target-recall", type=float, default=0.95)
    parser.add_argument("--confidence", type=float, default=0.95)
    parser.add_argument("--runs", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0,
                        help="first ordering seed; runs use seed..seed+runs-1")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args()

    if args.relevant > args.total:
        parser.error("--relevant cannot exceed --total")

    hidden = [True] * args.relevant + [False] * (args.total - args.relevant)
    config = StoppingConfig(rule=args.rule,
                            n_consecutive=args.n_consecutive,
                            target_recall=args.target_recall,
                            confidence=args.confidence)

    hits = 0
    screened_total = 0
    stopped_early = 0
    for seed in range(args.seed, args.seed + args.runs):
        order = random_order(args.total, seed)
        recall, screened = simulate_until_stop(hidden, order, config)
        hits += recall >= args.target_recall
        screened_total += screened
        stopped_early += screened < args.total
        if args.verbose:
            print(f"seed {seed}: recall {recall:.3f} after {screened}")

    mean_screened = screened_total / args.runs
    print(f"rule={args.rule} corpus={args.total} relevant={args.relevant}")
    print(f"{hits}/{args.runs} runs reached recall >= {args.target_recall} "
          f"({100.0 * hits / args.runs:.1f}%)")
    print(f"stopped before exhaustion in {stopped_early}/{args.runs} runs; "
          f"mean screened {mean_screened:.1f} "
          f"({100.0 * mean_screened / args.total:.1f}% of corpus)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
