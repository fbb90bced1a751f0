#!/usr/bin/env python3
"""Expected excess gradients per step across the subsampling-rate grid.

Writes one CSV with masked-padding rows (p in {64, 256, 1024}), the
truncated-Binomial baseline (epsilon in {1, 8}) and the closed-form upper
bound, at N = 50000, delta = tau = 1e-5, 40 epochs.  Plot expected_excess
against q, one line per (method, p or epsilon), to see where padding wins.
"""

import argparse
import sys

from dp_batcher.costsim import SweepConfig, default_q_grid, emit_csv, sweep_excess


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=50000)
    parser.add_argument("--q-step", type=float, default=0.01)
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--out", default="excess_vs_subsampling.csv")
    args = parser.parse_args()

    cfg = SweepConfig(
        dataset_size=args.n,
        q_grid=default_q_grid(step=args.q_step),
        physical_batches=(64, 256, 1024),
        epsilons=(1.0, 8.0),
        delta=1e-5,
        tau=1e-5,
        epochs=args.epochs,
    )
    curve = sweep_excess(cfg)
    emit_csv(curve, args.out)
    print(f"wrote {len(curve)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
