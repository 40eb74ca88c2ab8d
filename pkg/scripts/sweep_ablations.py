#!/usr/bin/env python3
"""Ablation sweep: full model vs ablated variants across training seeds.

Trains the policy with and without each ablated component on a shared
demonstration set, evaluates every checkpoint on the same trial seeds, and
prints a per-variant outcome table (success rate with Wilson interval plus
the object-dropping count, the metric the center-weighting ablation moves).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from tracebench.cli import EXIT_OK, main as cli
from tracebench.config import EvalConfig, SimConfig, TrainConfig
from tracebench.evaluation import run_eval, wilson_ci
from tracebench.labeling import read_dataset
from tracebench.policy import train

VARIANTS = ("full", "center", "task", "vision", "tactile")


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, default=Path("runs/ablations"))
    p.add_argument("--preset", default="rope")
    p.add_argument("--demos", type=int, default=25)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--variants", nargs="+", default=["full", "center"], choices=VARIANTS)
    return p.parse_args()


def main() -> None:
    args = parse_args()
    demos = args.out / "demos"
    if not (demos / "manifest.json").exists():
        rc = cli(["gen-demos", "--preset", args.preset, "--n", str(args.demos),
                  "--seed", str(args.seeds[0]), "--out", str(demos)])
        if rc != EXIT_OK:
            sys.exit(rc)
    episodes = read_dataset(demos)
    sim = SimConfig(object_preset=args.preset)

    rows = []
    for variant in args.variants:
        dropping = 0
        successes = trials = 0
        for seed in args.seeds:
            cfg = TrainConfig(epochs=args.epochs, seed=seed)
            if variant != "full":
                cfg = dataclasses.replace(cfg, **{f"ablate_{variant}": True})
            t0 = time.time()
            result = train(episodes, cfg)
            rep = run_eval(result.params, [args.preset],
                           EvalConfig(trials=args.trials, seed=100), sim)
            row = rep.rows[args.preset]
            successes += row["successes"]
            trials += row["trials"]
            dropping += row["counts"].get("ObjectDropping", 0)
            print(f"  {variant:8s} seed={seed}  {row['successes']}/{row['trials']} success, "
                  f"{row['counts'].get('ObjectDropping', 0)} dropped  ({time.time() - t0:.0f}s)",
                  flush=True)
        lo, hi = wilson_ci(successes, trials)
        rows.append((variant, successes, trials, lo, hi, dropping))

    print(f"\n{'variant':10s} {'success':>12s} {'95% CI':>16s} {'dropped':>8s}")
    for variant, s, n, lo, hi, d in rows:
        print(f"{variant:10s} {s:>7d}/{n:<4d} [{lo:5.1f}, {hi:5.1f}]  {d:>8d}")


if __name__ == "__main__":
    main()
