"""Inference: prior-mean decoding and open-loop chunk execution."""

from __future__ import annotations

import numpy as np

from ..config import SimConfig
from ..labeling import Observation
from ..sim import GripperAction, WorldState
from .network import ChunkPrediction, PolicyParams, decode, denormalize_actions


def infer(params: PolicyParams, obs: Observation) -> ChunkPrediction:
    """Decode one action/completion chunk with z = 0 (prior mean); deterministic."""
    cfg = params.cfg
    vis = obs.visual[None].astype(float) / 255.0
    tac = obs.tactile.pixels[None].astype(float) / 255.0
    kin = ((obs.kinematic.astype(float) - params.action_mean) / params.action_std)[None]
    z = np.zeros((1, cfg.latent_dim))
    a_hat, i_hat, _ = decode(params, vis, tac, kin, z)
    return ChunkPrediction(
        actions=denormalize_actions(params, a_hat[0]),
        completion=i_hat[0].copy(),
    )


def make_policy_controller(params: PolicyParams, config: SimConfig):
    """Controller executing full chunks open-loop (no temporal ensembling),
    re-inferring when the chunk is exhausted."""
    pending: list[np.ndarray] = []

    def controller(world: WorldState, step_idx: int, obs: Observation) -> GripperAction:
        if not pending:
            pred = infer(params, obs)
            pending.extend(list(pred.actions))
        a = pending.pop(0)
        return GripperAction(target_pose=a[:3].astype(float), target_aperture=float(a[3]))

    return controller
