"""Demonstration sources: scripted expert controller and teleoperation feedback.

The manipulability index sqrt(det(J J^T)) of the planar position Jacobian
drives the singularity alert used both by scripted runs and the live UI.
"""

from __future__ import annotations

import functools
from pathlib import Path

import numpy as np

from .config import ExpertGains, ExtractionParams, FrameSpec, SimConfig
from .labeling import LabeledEpisode, label_episode, write_dataset
from .rollout import Trajectory, run_rollout, trajectory_to_episode
from .sim import GripperAction, WorldState, contact_point
from .sim.arm import position_jacobian
from .sim.world import point_at_arc

ALERT_LAMBDA = 0.2
W_MAX_SAMPLES = 10_000
W_MAX_SEED = 20240

DEMO_ATTEMPT_CAP = 5  # attempts per requested demonstration


class DemoGenerationError(Exception):
    """Could not collect the requested number of successful demonstrations."""


def manipulability(q: np.ndarray, link_lengths: np.ndarray) -> float:
    """Yoshikawa index sqrt(det(J J^T)); 0 at singular configurations."""
    J = position_jacobian(np.asarray(q, dtype=float), np.asarray(link_lengths, dtype=float))
    det = float(np.linalg.det(J @ J.T))
    return float(np.sqrt(max(det, 0.0)))


@functools.lru_cache(maxsize=8)
def max_manipulability(link_lengths: tuple[float, ...]) -> float:
    """Seeded sampling estimate of max(w) over the joint space (cached per arm)."""
    rng = np.random.default_rng(W_MAX_SEED)
    links = np.array(link_lengths)
    best = 0.0
    for _ in range(W_MAX_SAMPLES):
        q = rng.uniform(-np.pi, np.pi, size=len(links))
        best = max(best, manipulability(q, links))
    return best


def singularity_alert(w: float, w_max: float, lambda_w: float = ALERT_LAMBDA) -> bool:
    """True iff w < lambda_w * w_max (strict at the boundary)."""
    if w_max <= 0:
        raise ValueError("w_max must be positive")
    return w < lambda_w * w_max


def expert_action(
    world: WorldState,
    gains: ExpertGains,
    config: SimConfig,
    rng: np.random.Generator | None = None,
) -> GripperAction:
    """Pure-pursuit tracing along the rope polyline with contact re-centering.

    Holds pose once the contact passes stop_fraction of the object length, and
    on lost contact (recovery is out of scope).
    """
    g = world.gripper
    contact = contact_point(world)
    if contact is None or contact.s >= gains.stop_fraction * config.L:
        return GripperAction(target_pose=g.pose.copy(), target_aperture=config.grasp_aperture)

    target, tangent = point_at_arc(world.rope.particles, contact.s + gains.lookahead)
    target = target.copy()
    # negative feedback on the lateral contact offset from the sensor center
    target += (gains.centering_gain * contact.lateral * config.dt) * g.normal
    if rng is not None and gains.jitter_sigma > 0:
        target += rng.normal(0.0, gains.jitter_sigma, size=2)
    # respect the expert's own speed limit (commanded targets stay reachable-ish)
    delta = target - g.position
    dist = float(np.linalg.norm(delta))
    max_d = gains.speed * config.dt
    if dist > max_d:
        target = g.position + delta * (max_d / dist)
    return GripperAction(
        target_pose=np.array([target[0], target[1], tangent]),
        target_aperture=config.grasp_aperture,
    )


def make_expert_controller(gains: ExpertGains, config: SimConfig, jitter_seed: int | None = None):
    rng = np.random.default_rng(jitter_seed) if jitter_seed is not None else None

    def controller(world: WorldState, _step: int, _obs=None) -> GripperAction:
        return expert_action(world, gains, config, rng)

    return controller


def expert_step_budget(config: SimConfig, gains: ExpertGains) -> int:
    """Nominal steps for a full trace at the expert speed (plus slack)."""
    return int(np.ceil(config.L / (gains.speed * config.dt))) + 60


def record_demos(
    n: int,
    config: SimConfig,
    gains: ExpertGains,
    seed: int,
    out_path: str | Path,
    frame_spec: FrameSpec | None = None,
    extraction: ExtractionParams | None = None,
    progress=None,
) -> Path:
    """Collect n successful seeded expert demonstrations, label, and write a dataset.

    Failed rollouts are re-seeded; gives up after 5x n attempts.
    """
    from .evaluation import Outcome, classify_outcome  # deferred: evaluation imports rollout

    if n < 1:
        raise ValueError("n must be >= 1")
    gains.validate()
    frame_spec = frame_spec or FrameSpec()
    extraction = extraction or ExtractionParams()
    budget = expert_step_budget(config, gains)

    episodes: list[LabeledEpisode] = []
    attempts = 0
    next_seed = seed
    while len(episodes) < n:
        if attempts >= DEMO_ATTEMPT_CAP * n:
            raise DemoGenerationError(
                f"expert produced only {len(episodes)}/{n} successes in {attempts} attempts "
                f"(preset={config.object_preset}); gains or config are infeasible"
            )
        attempts += 1
        rollout_seed = next_seed
        next_seed += 1
        controller = make_expert_controller(gains, config, jitter_seed=rollout_seed)
        traj = run_rollout(config, rollout_seed, controller, budget, frame_spec)
        outcome = classify_outcome(traj, config)
        if progress is not None:
            progress(rollout_seed, outcome)
        if outcome.outcome is not Outcome.SUCCESS:
            continue
        episodes.append(label_episode(trajectory_to_episode(traj), extraction))

    out_path = Path(out_path)
    config_echo = {
        "object_preset": config.object_preset,
        "n_demos": n,
        "seed": seed,
        "chunk_rate_hz": round(1.0 / config.dt),
    }
    write_dataset(episodes, out_path, config_echo=config_echo)
    return out_path
