"""Command-line entry point orchestrating the pipeline end to end.

Subcommands: gen-demos, label, train, eval, report, serve.

Configuration is a flat INI file with one section per module (sim, frame,
extraction, expert, train, eval, service); every key is also exposed as a
``--section-key`` flag that overrides the file.  Exit codes: 0 success,
2 usage error, 3 data error, 4 runtime divergence.  The environment variable
``TRACEBENCH_THREADS`` caps internal parallelism (see evaluation module).
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
import typing
from pathlib import Path

from . import __version__
from .config import (
    EvalConfig,
    ExpertGains,
    ExtractionParams,
    FrameSpec,
    PRESETS,
    RunConfig,
    ServiceConfig,
    SimConfig,
    TrainConfig,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

_SECTIONS: dict[str, type] = {
    "sim": SimConfig,
    "frame": FrameSpec,
    "extraction": ExtractionParams,
    "expert": ExpertGains,
    "train": TrainConfig,
    "eval": EvalConfig,
    "service": ServiceConfig,
}

ABLATIONS = ("none", "vision", "tactile", "center", "task")


class CliDataError(Exception):
    """Wraps file/dataset/checkpoint problems for the exit-code mapping."""


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _field_parser(f: dataclasses.Field):
    """Return a string->value converter for a dataclass field."""
    origin = typing.get_origin(f.type) if not isinstance(f.type, str) else None
    ftype = f.type
    if isinstance(ftype, str):  # from __future__ annotations
        if ftype.startswith("tuple"):
            return lambda s: tuple(float(x) for x in s.split(","))
        ftype = {"int": int, "float": float, "bool": bool, "str": str}.get(ftype, str)
    elif origin is tuple:
        return lambda s: tuple(float(x) for x in s.split(","))
    if ftype is bool:
        return _parse_bool
    return ftype


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Expose every RunConfig key as a --section-key override flag."""
    parser.add_argument("--config", metavar="FILE", help="INI config file (section per module)")
    for section, cls in _SECTIONS.items():
        group = parser.add_argument_group(f"{section} config")
        for f in dataclasses.fields(cls):
            group.add_argument(
                f"--{section}-{f.name.replace('_', '-')}",
                dest=f"cfg__{section}__{f.name}",
                type=_field_parser(f),
                default=None,
                metavar="V",
                help=f"{section}.{f.name} (default {f.default!r})",
            )


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults <- config file <- command-line flags."""
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise CliDataError(f"config file not found: {path}")
        ini = configparser.ConfigParser()
        ini.read(path)
        for section, cls in _SECTIONS.items():
            if not ini.has_section(section):
                continue
            by_name = {f.name: f for f in dataclasses.fields(cls)}
            for key, raw in ini.items(section):
                if key not in by_name:
                    raise CliDataError(f"unknown config key [{section}] {key}")
                try:
                    values[section][key] = _field_parser(by_name[key])(raw)
                except (ValueError, argparse.ArgumentTypeError) as e:
                    raise CliDataError(f"bad value for [{section}] {key}: {e}") from e
    for name, value in vars(args).items():
        if name.startswith("cfg__") and value is not None:
            _, section, key = name.split("__", 2)
            values[section][key] = value
    run = RunConfig(**{s: cls(**values[s]) for s, cls in _SECTIONS.items()})
    run.sim.validate()
    run.frame.validate()
    run.extraction.validate()
    run.expert.validate()
    return run


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracebench",
        description="Deformable-object tracing: demos, labeling, training, evaluation, teleop.",
    )
    parser.add_argument("--version", action="version", version=f"tracebench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="record scripted-expert demonstrations into a dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--n", type=_positive_int, default=25, help="number of successful demos")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output dataset directory")
    add_config_flags(p)

    p = sub.add_parser("label", help="re-extract contacts and relabel an existing dataset")
    p.add_argument("--raw", required=True, help="input dataset directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    add_config_flags(p)

    p = sub.add_parser("train", help="train the chunked policy on a labeled dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--epochs", type=int, default=None, help="override train.epochs")
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.add_argument("--ablate", choices=ABLATIONS, default="none")
    p.add_argument("--out", required=True, help="output checkpoint file")
    p.add_argument("--curves", default=None, help="loss-curve JSON output (default <out>.curves.json)")
    add_config_flags(p)

    p = sub.add_parser("eval", help="roll out a checkpoint (or the expert) and report outcomes")
    p.add_argument("--ckpt", default=None, help="checkpoint file; omit to evaluate the scripted expert")
    p.add_argument("--trials", type=int, default=None, help="override eval.trials")
    p.add_argument("--seed", type=int, default=None, help="override eval.seed")
    p.add_argument("--preset", action="append", choices=sorted(PRESETS), help="repeatable; default: rope")
    p.add_argument("--out", required=True, help="output report directory")
    add_config_flags(p)

    p = sub.add_parser("report", help="aggregate trial records into a table")
    p.add_argument("--results", nargs="+", required=True, help="trials.jsonl files")
    p.add_argument("--format", choices=("table",), default="table")
    add_config_flags(p)

    p = sub.add_parser("serve", help="run the realtime teleoperation bridge")
    p.add_argument("--port", type=int, default=None, help="override service.port")
    add_config_flags(p)
    return parser


def cmd_gen_demos(args: argparse.Namespace) -> int:
    from .teleop import DemoGenerationError, record_demos

    run = load_run_config(args)
    sim = dataclasses.replace(run.sim, object_preset=args.preset)

    def progress(seed: int, outcome) -> None:
        print(f"episode seed={seed}: {outcome.outcome.value}", flush=True)

    try:
        out = record_demos(
            args.n, sim, run.expert, args.seed, args.out,
            frame_spec=run.frame, extraction=run.extraction, progress=progress,
        )
    except DemoGenerationError as e:
        raise CliDataError(str(e)) from e
    print(f"wrote {args.n} episodes to {out}")
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    from .labeling import label_episode, read_dataset, write_dataset

    run = load_run_config(args)
    episodes = read_dataset(args.raw)
    relabeled = [label_episode(ep.episode, run.extraction) for ep in episodes]
    write_dataset(relabeled, args.out)
    print(f"relabeled {len(relabeled)} episodes -> {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from .labeling import read_dataset
    from .policy import save_checkpoint, train

    run = load_run_config(args)
    cfg = run.train
    if args.epochs is not None:
        cfg = dataclasses.replace(cfg, epochs=args.epochs)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.ablate != "none":
        cfg = dataclasses.replace(cfg, **{f"ablate_{args.ablate}": True})
    dataset = read_dataset(args.data)
    result = train(dataset, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, out)
    curves_path = Path(args.curves) if args.curves else out.with_suffix(out.suffix + ".curves.json")
    envelope = []
    best = float("inf")
    for v in result.val_curve:
        best = min(best, v)
        envelope.append(best)
    curves_path.write_text(json.dumps({
        "train": result.train_curve,
        "val": result.val_curve,
        "center": result.center_curve,
        "val_envelope": envelope,
        "best_epoch": result.best_epoch,
    }))
    final_val = result.val_curve[-1] if result.val_curve else float("nan")
    print(f"trained {cfg.epochs} epochs (best epoch {result.best_epoch}, "
          f"final val {final_val:.6f}); checkpoint -> {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from .evaluation import run_eval
    from .policy import load_checkpoint

    run = load_run_config(args)
    cfg = run.eval
    if args.trials is not None:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if cfg.trials < 0:
        raise CliDataError("trials must be >= 0")
    params = load_checkpoint(args.ckpt) if args.ckpt else None
    presets = args.preset or ["rope"]
    report = run_eval(params, presets, cfg, run.sim, run.expert, frame_spec=run.frame)
    out = Path(args.out)
    report.write(out)
    print(report.to_table())
    print(f"report -> {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .evaluation import EvalReport, TrialOutcome, aggregate

    by_preset: dict[str, list[TrialOutcome]] = {}
    for path in args.results:
        p = Path(path)
        if not p.exists():
            raise CliDataError(f"results file not found: {p}")
        for line in p.read_text().splitlines():
            if not line.strip():
                continue
            try:
                preset, trial = TrialOutcome.from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                raise CliDataError(f"malformed trial record in {p}: {e}") from e
            by_preset.setdefault(preset, []).append(trial)
    report: EvalReport = aggregate(by_preset)
    print(report.to_table())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve_forever

    run = load_run_config(args)
    service = run.service
    if args.port is not None:
        service = dataclasses.replace(service, port=args.port)
    serve_forever(run, service)
    return EXIT_OK


_COMMANDS = {
    "gen-demos": cmd_gen_demos,
    "label": cmd_label,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from .labeling import DatasetError
    from .policy.checkpoint import CheckpointError
    from .policy.train import TrainingDiverged

    try:
        return _COMMANDS[args.command](args)
    except TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CliDataError, DatasetError, CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
