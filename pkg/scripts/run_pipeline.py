#!/usr/bin/env python3
"""End-to-end experiment: demos -> labels -> training -> evaluation.

Reproduces the headline desk-scale run (25 demonstrations, rope preset,
2,000 epochs, 20 evaluation trials) in one invocation.  Every stage shells
through the CLI so the script doubles as a usage example; pass --quick for a
smoke-sized variant that finishes in under a minute.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from tracebench.cli import EXIT_OK, main as cli


def run(args: list[str]) -> None:
    print(f"$ tracebench {' '.join(args)}")
    rc = cli(args)
    if rc != EXIT_OK:
        sys.exit(rc)


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, default=Path("runs/pipeline"))
    p.add_argument("--preset", default="rope")
    p.add_argument("--demos", type=int, default=25)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--quick", action="store_true",
                   help="tiny run (2 demos, 5 epochs, 2 trials) to sanity-check the toolchain")
    return p.parse_args()


def main() -> None:
    args = parse_args()
    if args.quick:
        args.demos, args.epochs, args.trials = 2, 5, 2
    out = args.out
    demos = out / "demos"
    ckpt = out / "policy.tbck"
    report = out / "eval"
    t0 = time.time()

    run(["gen-demos", "--preset", args.preset, "--n", str(args.demos),
         "--seed", str(args.seed), "--out", str(demos)])
    run(["train", "--data", str(demos), "--out", str(ckpt),
         "--epochs", str(args.epochs), "--seed", str(args.seed)])
    run(["eval", "--ckpt", str(ckpt), "--preset", args.preset,
         "--trials", str(args.trials), "--seed", "100", "--out", str(report)])
    run(["report", "--results", str(report / "trials.jsonl")])

    print(f"pipeline finished in {time.time() - t0:.0f}s; artifacts under {out}/")


if __name__ == "__main__":
    main()
