"""Rollout plumbing shared by the scripted expert, evaluation, and the service."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import FrameSpec, SimConfig
from .labeling import Episode, Observation
from .sim import GripperAction, Status, WorldState, contact_point, render_visual, spawn, step
from .tactile import render_tactile

VISUAL_RESOLUTION = 64

Controller = Callable[..., GripperAction]  # (world, step_idx, obs) -> action


@dataclass
class Trajectory:
    """A terminated (or budget-exhausted) rollout."""

    states: list[WorldState]  # length T+1 (initial state included)
    actions: list[GripperAction]  # length T
    observations: list[Observation]  # length T (observation preceding each action)
    config: SimConfig
    seed: int

    @property
    def final(self) -> WorldState:
        return self.states[-1]


def frame_seed(base_seed: int, step_idx: int) -> int:
    return (base_seed * 1000003 + step_idx) & 0x7FFFFFFF


def make_observation(world: WorldState, config: SimConfig, frame_spec: FrameSpec, seed: int, step_idx: int) -> Observation:
    tac = render_tactile(world, frame_spec, frame_seed(seed, step_idx), config)
    # timestamps are index-derived so the on-disk format reconstructs them exactly
    tac = dataclasses.replace(tac, timestamp=step_idx / round(1.0 / config.dt))
    return Observation(
        kinematic=np.concatenate([world.gripper.pose, [world.gripper.aperture]]).astype(np.float32),
        visual=render_visual(world, VISUAL_RESOLUTION, config),
        tactile=tac,
    )


def run_rollout(
    config: SimConfig,
    seed: int,
    controller: Controller,
    max_steps: int,
    frame_spec: Optional[FrameSpec] = None,
    world: Optional[WorldState] = None,
) -> Trajectory:
    """Run ``controller`` from a seeded spawn until termination or budget."""
    frame_spec = frame_spec or FrameSpec()
    if world is None:
        world = spawn(config, seed)
    states = [world]
    actions: list[GripperAction] = []
    observations: list[Observation] = []
    for i in range(max_steps):
        if world.status is not Status.RUNNING:
            break
        obs = make_observation(world, config, frame_spec, seed, i)
        action = controller(world, i, obs)
        world = step(world, action, config)
        observations.append(obs)
        actions.append(action)
        states.append(world)
    return Trajectory(states=states, actions=actions, observations=observations, config=config, seed=seed)


def trajectory_to_episode(traj: Trajectory) -> Episode:
    """Package a rollout as a recorded demonstration episode."""
    steps = [
        (obs, np.concatenate([a.target_pose, [a.target_aperture]]).astype(np.float32))
        for obs, a in zip(traj.observations, traj.actions)
    ]
    return Episode(
        steps=steps,
        p_0=traj.states[0].rope.particles[0].copy(),
        rate_hz=round(1.0 / traj.config.dt),
        object_preset=traj.config.object_preset,
        seed=traj.seed,
    )


def max_arc_reached(traj: Trajectory) -> float:
    """Largest ground-truth contact arc length seen over the trajectory."""
    best = 0.0
    for w in traj.states:
        c = contact_point(w)
        if c is not None:
            best = max(best, c.s)
    return best
