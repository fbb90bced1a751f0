#!/usr/bin/env python3
"""Generate a synthetic CSV dataset for the train/bench commands."""

import argparse
import sys

from dp_batcher.data import save_csv, synthetic_classification, synthetic_regression


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=("classification", "regression"), default="classification")
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--features", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="synthetic.csv")
    args = parser.parse_args()

    if args.kind == "classification":
        data = synthetic_classification(args.n, args.features, seed=args.seed)
    else:
        data = synthetic_regression(args.n, args.features, seed=args.seed)
    save_csv(data, args.out)
    print(f"wrote {data.n_examples} x {data.n_features} {args.kind} dataset to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
