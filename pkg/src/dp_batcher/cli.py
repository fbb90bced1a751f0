"""Command-line entry point.

Subcommands:
    simulate-excess  sweep expected excess gradients per step, write CSV
    train            run masked or plain Poisson DP-SGD, write a JSON report
    verify-sampler   chi-square the sampler's batch law against independent
                     per-example inclusion (exact, over all subsets)
    bench            samples/second micro-benchmark of the training loop

Exit codes: 0 success, 1 runtime/IO failure, 2 usage error.  Every command is
deterministic given --seed (bench wall-clock readings excluded).
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time

from . import costsim
from .data import load_csv
from .engine import ClipSpec, NoiseSpec, dataset_metrics, train
from .models import MODEL_NAMES, build_model
from .rng import RngStreams
from .sampling import (
    MAX_VERIFY_INDICES,
    SamplerConfig,
    verify_active_set_law,
)

DEFAULT_SEED = 0xDB5EED  # fixed so out-of-the-box runs are reproducible

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _threads_default() -> int:
    env = os.environ.get("DP_BATCHER_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def parse_q_grid(text: str) -> tuple[float, ...]:
    """Parse 'lo:hi:step' or a comma-separated list of rates in (0, 1]."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("range form is lo:hi:step")
            lo, hi, step = (float(p) for p in parts)
            if step <= 0 or hi < lo:
                raise ValueError("range needs step > 0 and hi >= lo")
            grid = costsim.default_q_grid(step=step, lo=lo, hi=hi)
        else:
            grid = tuple(float(p) for p in text.split(",") if p.strip())
        if not grid or any(not 0.0 < q <= 1.0 for q in grid):
            raise ValueError("rates must lie in (0, 1]")
        return grid
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad q grid {text!r}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dp-batcher",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate-excess",
        help="sweep expected excess gradients per step over q, p and epsilon",
    )
    sim.add_argument("--n", type=_positive_int, default=50000, help="dataset size")
    sim.add_argument(
        "--q-grid",
        type=parse_q_grid,
        default=costsim.default_q_grid(),
        help="subsampling rates: 'lo:hi:step' or comma list (default 0.01:1.0:0.01)",
    )
    sim.add_argument(
        "--p",
        type=_positive_int,
        action="append",
        help="physical batch size, repeatable (default 64 256 1024)",
    )
    sim.add_argument(
        "--epsilon",
        type=float,
        action="append",
        help="privacy budget for the truncated method, repeatable (default 1 8)",
    )
    sim.add_argument("--delta", type=float, default=1e-5)
    sim.add_argument("--tau", type=float, default=1e-5)
    sim.add_argument("--epochs", type=_positive_int, default=40)
    sim.add_argument("--out", default="excess_curve.csv", help="output CSV path")

    tr = sub.add_parser("train", help="train a model with per-example clipping and noise")
    tr.add_argument("--data", required=True, help="dataset CSV (header, label last)")
    tr.add_argument("--model", required=True, choices=MODEL_NAMES)
    tr.add_argument("--steps", type=int, default=50)
    tr.add_argument("--l", type=float, required=True, help="expected logical batch size")
    tr.add_argument("--p", type=_positive_int, default=64, help="physical batch size")
    tr.add_argument("--clip", type=float, default=1.0, help="gradient norm bound")
    tr.add_argument("--sigma", type=float, default=1.0, help="noise scale")
    tr.add_argument("--lr", type=float, default=0.1)
    tr.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED:#x})")
    tr.add_argument("--mode", choices=("masked", "exact-poisson"), default="masked")
    tr.add_argument("--report", default="train_report.json", help="JSON report path")
    tr.add_argument("--threads", type=_positive_int, default=_threads_default(),
                    help="gradient worker threads (default DP_BATCHER_THREADS or 1)")

    ver = sub.add_parser(
        "verify-sampler",
        help="exact subset-law chi-square test of the masked sampler",
    )
    ver.add_argument("--n", type=_positive_int, required=True, help=f"dataset size (<= {MAX_VERIFY_INDICES})")
    ver.add_argument("--q", type=float, required=True, help="subsampling rate")
    ver.add_argument("--draws", type=_positive_int, default=1_000_000)
    ver.add_argument("--alpha", type=float, default=1e-3, help="significance level")
    ver.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED:#x})")

    be = sub.add_parser("bench", help="samples/second of the step loop, median over repeats")
    be.add_argument("--data", required=True)
    be.add_argument("--model", required=True, choices=MODEL_NAMES)
    be.add_argument("--l", type=float, required=True)
    be.add_argument("--p", type=_positive_int, default=64)
    be.add_argument("--steps", type=_positive_int, default=10)
    be.add_argument("--mode", choices=("masked", "exact-poisson", "shuffle-baseline"), default="masked")
    be.add_argument("--repeats", type=_positive_int, default=3)
    be.add_argument("--clip", type=float, default=1.0)
    be.add_argument("--sigma", type=float, default=1.0)
    be.add_argument("--lr", type=float, default=0.01)
    be.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED:#x})")
    be.add_argument("--threads", type=_positive_int, default=_threads_default())
    return parser


def cmd_simulate_excess(args) -> int:
    cfg = costsim.SweepConfig(
        dataset_size=args.n,
        q_grid=tuple(args.q_grid),
        physical_batches=tuple(args.p) if args.p else (64, 256, 1024),
        epsilons=tuple(args.epsilon) if args.epsilon else (1.0, 8.0),
        delta=args.delta,
        tau=args.tau,
        epochs=args.epochs,
    )
    curve = costsim.sweep_excess(cfg)
    costsim.emit_csv(curve, args.out)
    print(f"wrote {len(curve)} rows to {args.out}")
    return EXIT_OK


def _load_train_inputs(args):
    data = load_csv(args.data)
    model = build_model(args.model)
    cfg = SamplerConfig(
        dataset_size=data.n_examples,
        expected_batch=args.l,
        physical_batch=args.p,
    )
    clip = ClipSpec(max_norm=args.clip)
    noise = NoiseSpec(sigma=args.sigma, expected_batch=args.l, steps=max(args.steps, 0))
    return data, model, cfg, clip, noise


def cmd_train(args) -> int:
    if args.steps < 0:
        raise ValueError("--steps must be non-negative")
    data, model, cfg, clip, noise = _load_train_inputs(args)
    streams = RngStreams(args.seed)
    theta, reports = train(
        model, data, cfg, clip, noise,
        lr=args.lr, steps=args.steps, streams=streams,
        mode=args.mode, threads=args.threads,
    )
    final = dataset_metrics(model, data, theta)
    report = {
        "config": {
            "data": args.data,
            "model": args.model,
            "steps": args.steps,
            "expected_batch": args.l,
            "physical_batch": args.p,
            "clip": args.clip,
            "sigma": args.sigma,
            "lr": args.lr,
            "seed": args.seed,
            "mode": args.mode,
            "threads": args.threads,
        },
        "steps": [r.to_dict() for r in reports],
        "final": final,
        "final_params": [float(v) for v in theta],
    }
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    acc = final["accuracy"]
    acc_text = f" accuracy={acc:.4f}" if acc is not None else ""
    print(f"trained {args.steps} steps: loss={final['loss']:.6g}{acc_text} -> {args.report}")
    return EXIT_OK


def cmd_verify_sampler(args) -> int:
    if args.n > MAX_VERIFY_INDICES:
        raise ValueError(f"--n must be <= {MAX_VERIFY_INDICES} (subset space is 2^n)")
    if not 0.0 < args.q < 1.0:
        raise ValueError("--q must lie strictly inside (0, 1)")
    cfg = SamplerConfig(
        dataset_size=args.n,
        expected_batch=args.q * args.n,
        physical_batch=min(4, args.n),
    )
    result = verify_active_set_law(cfg, RngStreams(args.seed), args.draws)
    if result.min_expected < 5.0:
        print(
            f"warning: smallest expected subset count is {result.min_expected:.2f} (< 5); "
            "increase --draws for a calibrated test",
            file=sys.stderr,
        )
    print(
        f"chi-square statistic={result.statistic:.3f} dof={result.dof} "
        f"p-value={result.p_value:.6g} draws={result.draws}"
    )
    if result.passed(args.alpha):
        print(f"PASS at alpha={args.alpha:g}")
        return EXIT_OK
    print(f"FAIL at alpha={args.alpha:g}")
    return EXIT_RUNTIME


def cmd_bench(args) -> int:
    data, model, cfg, clip, noise = _load_train_inputs(args)
    if args.mode == "shuffle-baseline":
        print(
            "warning: shuffle-baseline batches are NOT Poisson subsampled; "
            "standard DP accounting does not apply to this mode",
            file=sys.stderr,
        )
    processed_rates = []
    active_rates = []
    for rep in range(args.repeats):
        streams = RngStreams(args.seed).spawn_task(rep)
        start = time.perf_counter()
        _, reports = train(
            model, data, cfg, clip, noise,
            lr=args.lr, steps=args.steps, streams=streams,
            mode=args.mode, threads=args.threads,
        )
        elapsed = time.perf_counter() - start
        processed = sum(r.samples_processed for r in reports)
        active = sum(r.true_size for r in reports)
        processed_rates.append(processed / elapsed)
        active_rates.append(active / elapsed)
        print(
            f"repeat {rep}: processed/s={processed_rates[-1]:.1f} "
            f"active/s={active_rates[-1]:.1f} ({processed} processed, {active} active)"
        )
    print(
        f"median: processed/s={statistics.median(processed_rates):.1f} "
        f"active/s={statistics.median(active_rates):.1f}"
    )
    return EXIT_OK


_COMMANDS = {
    "simulate-excess": cmd_simulate_excess,
    "train": cmd_train,
    "verify-sampler": cmd_verify_sampler,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
