"""Rollout evaluation: outcome taxonomy, Wilson CIs, aggregate reports."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EvalConfig, ExpertGains, FrameSpec, SimConfig
from .rollout import Trajectory, max_arc_reached, run_rollout
from .sim import Status, contact_point
from .teleop import expert_step_budget

Z_95 = 1.959964
FINAL_FRACTION = 0.95  # "terminal end" = final 5% of the object length


class EvalError(Exception):
    pass


class Outcome(enum.Enum):
    SUCCESS = "Success"
    ROBOT_COLLISION = "RobotCollision"
    EARLY_STOPPING = "EarlyStopping"
    OVER_TRACING = "OverTracing"
    OBJECT_DROPPING = "ObjectDropping"


@dataclass(frozen=True)
class TrialOutcome:
    outcome: Outcome
    completion_ratio: float
    final_arc_length: float
    seed: int
    success_time: float | None = None  # seconds; present iff Success
    no_contact: bool = False  # completion ratio flagged: no contact was ever observed

    def to_json(self, preset: str) -> dict:
        return {
            "preset": preset,
            "seed": self.seed,
            "outcome": self.outcome.value,
            "completion_ratio": self.completion_ratio,
            "final_arc_length": self.final_arc_length,
            "success_time": self.success_time,
            "no_contact": self.no_contact,
        }

    @staticmethod
    def from_json(record: dict) -> tuple[str, "TrialOutcome"]:
        return record["preset"], TrialOutcome(
            outcome=Outcome(record["outcome"]),
            completion_ratio=float(record["completion_ratio"]),
            final_arc_length=float(record["final_arc_length"]),
            seed=int(record["seed"]),
            success_time=record.get("success_time"),
            no_contact=bool(record.get("no_contact", False)),
        )


def classify_outcome(traj: Trajectory, config: SimConfig) -> TrialOutcome:
    """Five-way classification of a terminated trajectory."""
    final = traj.final
    if final.status is Status.RUNNING and len(traj.actions) == 0:
        raise EvalError("cannot classify a trajectory that has not been run")
    reached = max_arc_reached(traj)
    threshold = FINAL_FRACTION * config.L
    ratio, no_contact = completion_ratio(traj, config.L)

    if final.status is Status.COLLIDED:
        outcome = Outcome.ROBOT_COLLISION
    elif final.status is Status.DROPPED:
        outcome = Outcome.OVER_TRACING if reached >= threshold else Outcome.OBJECT_DROPPING
    elif reached >= threshold:
        outcome = Outcome.SUCCESS
    else:
        outcome = Outcome.EARLY_STOPPING

    success_time = None
    if outcome is Outcome.SUCCESS:
        success_time = _time_of_first_reach(traj, threshold)
    return TrialOutcome(
        outcome=outcome,
        completion_ratio=ratio,
        final_arc_length=reached,
        seed=traj.seed,
        success_time=success_time,
        no_contact=no_contact,
    )


def _time_of_first_reach(traj: Trajectory, threshold: float) -> float:
    for w in traj.states:
        c = contact_point(w)
        if c is not None and c.s >= threshold:
            return w.time
    return traj.final.time


def completion_ratio(traj: Trajectory, L: float) -> tuple[float, bool]:
    """||p_T - p_0|| / L from the last observed contact; (0, True) if never in contact."""
    p_0 = traj.states[0].rope.particles[0]
    last = None
    for w in traj.states:
        c = contact_point(w)
        if c is not None:
            last = c.point
    if last is None:
        return 0.0, True
    return float(np.linalg.norm(last - p_0) / L), False


def wilson_ci(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval, returned as percentages rounded to 1 decimal."""
    if trials < 1 or not (0 <= successes <= trials):
        raise ValueError("need 0 <= successes <= trials, trials >= 1")
    if confidence != 0.95:
        raise ValueError("only the 95% interval is supported")
    z = Z_95
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    margin = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    lo = round(100 * (center - margin), 1)
    hi = round(100 * (center + margin), 1)
    return (abs(lo) if lo == 0 else lo, hi)  # avoid a "-0.0" lower bound


@dataclass
class EvalReport:
    rows: dict[str, dict]  # per-preset and "all" aggregate rows
    trials: list[dict]  # one record per trial

    def to_table(self) -> str:
        if not self.rows:
            return "(no trials)\n"
        header = (
            f"{'Dataset':10s} {'Success rate (Wilson 95% CI)':30s} "
            f"{'Collision':>9s} {'EarlyStop':>9s} {'OverTrace':>9s} {'Dropping':>9s} "
            f"{'SuccTime':>12s} {'ComplRatio':>12s}"
        )
        lines = [header, "-" * len(header)]
        for name, r in self.rows.items():
            n = r["trials"]
            rate = f"{100 * r['successes'] / n:.1f}% [{r['ci'][0]}, {r['ci'][1]}]"
            st = f"{r['success_time_mean']:.1f}±{r['success_time_sd']:.1f}s" if r["success_time_mean"] is not None else "-"
            cr = f"{r['completion_mean']:.2f}±{r['completion_sd']:.2f}"
            lines.append(
                f"{name:10s} {rate:30s} "
                f"{r['counts']['RobotCollision']:>6d}/{n:<2d} {r['counts']['EarlyStopping']:>6d}/{n:<2d} "
                f"{r['counts']['OverTracing']:>6d}/{n:<2d} {r['counts']['ObjectDropping']:>6d}/{n:<2d} "
                f"{st:>12s} {cr:>12s}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        (path / "report.txt").write_text(self.to_table(), encoding="utf-8")
        with open(path / "trials.jsonl", "w", encoding="utf-8") as f:
            for t in self.trials:
                f.write(json.dumps(t, sort_keys=True) + "\n")


def aggregate(outcomes: dict[str, list[TrialOutcome]]) -> EvalReport:
    """Per-preset rows plus a pooled row, mirroring the ablation-table shape."""
    rows: dict[str, dict] = {}
    trials: list[dict] = []
    pooled: list[TrialOutcome] = []
    for preset, outs in outcomes.items():
        pooled.extend(outs)
        if outs:
            rows[preset] = _row(outs)
        for o in outs:
            trials.append(o.to_json(preset))
    if len(outcomes) > 1 and pooled:
        rows["all"] = _row(pooled)
    return EvalReport(rows=rows, trials=trials)


def _row(outs: list[TrialOutcome]) -> dict:
    n = len(outs)
    counts = {o.value: 0 for o in Outcome}
    for t in outs:
        counts[t.outcome.value] += 1
    succ = counts[Outcome.SUCCESS.value]
    times = [t.success_time for t in outs if t.success_time is not None]
    ratios = [t.completion_ratio for t in outs]
    return {
        "trials": n,
        "successes": succ,
        "ci": list(wilson_ci(succ, n)),
        "counts": counts,
        "success_time_mean": float(np.mean(times)) if times else None,
        "success_time_sd": float(np.std(times)) if times else 0.0,
        "completion_mean": float(np.mean(ratios)),
        "completion_sd": float(np.std(ratios)),
    }


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("TRACEBENCH_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(
    config: SimConfig,
    controller_factory,
    n_trials: int,
    seed: int,
    budget: int,
    frame_spec: FrameSpec | None = None,
) -> list[TrialOutcome]:
    """Seeded independent trials; deterministic aggregation order by trial index."""
    frame_spec = frame_spec or FrameSpec()

    def one(i: int) -> TrialOutcome:
        trial_seed = seed + i
        traj = run_rollout(config, trial_seed, controller_factory(trial_seed), budget, frame_spec)
        return classify_outcome(traj, config)

    workers = min(_thread_cap(), max(n_trials, 1))
    if workers > 1 and n_trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(n_trials)))
    return [one(i) for i in range(n_trials)]


def run_eval(
    params,
    presets: list[str],
    eval_config: EvalConfig,
    sim_config: SimConfig,
    gains: ExpertGains | None = None,
    frame_spec: FrameSpec | None = None,
) -> EvalReport:
    """Evaluate a trained policy (or the scripted expert when params is None)."""
    from .policy.infer import make_policy_controller  # deferred: policy is heavier
    from .teleop import make_expert_controller

    gains = gains or ExpertGains()
    outcomes: dict[str, list[TrialOutcome]] = {}
    for preset in presets:
        cfg = dataclasses.replace(sim_config, object_preset=preset)
        budget = int(eval_config.budget_factor * expert_step_budget(cfg, gains))
        if params is None:
            factory = lambda ts, c=cfg: make_expert_controller(gains, c, jitter_seed=ts)
        else:
            factory = lambda ts, c=cfg: make_policy_controller(params, c)
        outcomes[preset] = run_trials(cfg, factory, eval_config.trials, eval_config.seed, budget, frame_spec)
    return aggregate(outcomes)
