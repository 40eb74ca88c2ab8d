"""Chunked CVAE policy network: patch-mean image encoders + MLP encoder/decoder.

All tensors are float64 numpy arrays and gradients are exact analytic
backpropagation (verified against central finite differences in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import TrainConfig

VIS_RES = 64
VIS_PATCH = 8
TAC_RES = 32
TAC_PATCH = 4
KIN_DIM = 4
ACTION_DIM = 4


@dataclass
class PolicyParams:
    tensors: dict[str, np.ndarray]
    cfg: TrainConfig
    action_mean: np.ndarray  # (4,)
    action_std: np.ndarray  # (4,)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            cfg=self.cfg,
            action_mean=self.action_mean.copy(),
            action_std=self.action_std.copy(),
        )

    def n_params(self) -> int:
        return sum(v.size for v in self.tensors.values())


@dataclass(frozen=True)
class ChunkPrediction:
    actions: np.ndarray  # (k, 4), denormalized target poses + aperture
    completion: np.ndarray  # (k,), in (0, 1) by sigmoid


def _shapes(cfg: TrainConfig) -> dict[str, tuple[int, ...]]:
    n_vis_patches = (VIS_RES // VIS_PATCH) ** 2
    n_tac_patches = (TAC_RES // TAC_PATCH) ** 2
    enc_in = cfg.chunk * ACTION_DIM + cfg.kin_dim
    dec_in = cfg.vis_dim + cfg.tac_dim + cfg.kin_dim + cfg.latent_dim
    return {
        "W_vis": (n_vis_patches, cfg.vis_dim),
        "b_vis": (cfg.vis_dim,),
        "W_tac": (n_tac_patches, cfg.tac_dim),
        "b_tac": (cfg.tac_dim,),
        "W_kin": (KIN_DIM, cfg.kin_dim),
        "b_kin": (cfg.kin_dim,),
        "W_e1": (enc_in, cfg.enc_hidden),
        "b_e1": (cfg.enc_hidden,),
        "W_e2": (cfg.enc_hidden, 2 * cfg.latent_dim),
        "b_e2": (2 * cfg.latent_dim,),
        "W_d1": (dec_in, cfg.hidden_dim),
        "b_d1": (cfg.hidden_dim,),
        "W_d2": (cfg.hidden_dim, cfg.hidden_dim),
        "b_d2": (cfg.hidden_dim,),
        "W_act": (cfg.hidden_dim, cfg.chunk * ACTION_DIM),
        "b_act": (cfg.chunk * ACTION_DIM,),
        "W_cmp": (cfg.hidden_dim, cfg.chunk),
        "b_cmp": (cfg.chunk,),
    }


def init_params(cfg: TrainConfig, seed: int, action_mean=None, action_std=None) -> PolicyParams:
    """Seeded uniform +-1/sqrt(fan_in) weights, zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in _shapes(cfg).items():
        if name.startswith("b"):
            tensors[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return PolicyParams(
        tensors=tensors,
        cfg=cfg,
        action_mean=np.zeros(ACTION_DIM) if action_mean is None else np.asarray(action_mean, dtype=float),
        action_std=np.ones(ACTION_DIM) if action_std is None else np.asarray(action_std, dtype=float),
    )


def patch_means(images: np.ndarray, patch: int) -> np.ndarray:
    """(B, R, R) -> (B, (R/patch)^2) means over non-overlapping patches."""
    b, r, _ = images.shape
    g = r // patch
    return images.reshape(b, g, patch, g, patch).mean(axis=(2, 4)).reshape(b, g * g)


def encode(params: PolicyParams, kin: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Gaussian posterior parameters from (kinematics, action chunk). Training only.

    kin: (B, 4) normalized; actions: (B, k, 4) normalized.
    Returns (mu, logsig) each (B, d_z) and a cache for backprop.
    """
    t = params.tensors
    b = kin.shape[0]
    f_k = kin @ t["W_kin"] + t["b_kin"]
    enc_in = np.concatenate([actions.reshape(b, -1), f_k], axis=1)
    h_pre = enc_in @ t["W_e1"] + t["b_e1"]
    h = np.tanh(h_pre)
    mulog = h @ t["W_e2"] + t["b_e2"]
    d = params.cfg.latent_dim
    cache = {"kin": kin, "enc_in": enc_in, "h": h}
    return mulog[:, :d], mulog[:, d:], cache

def reparameterize(mu: np.ndarray, logsig: np.ndarray, eps: np.ndarray) -> np.ndarray:
    return mu + np.exp(logsig) * eps


def decode(
    params: PolicyParams,
    vis: np.ndarray,
    tac: np.ndarray,
    kin: np.ndarray,
    z: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Decode to (normalized action chunk (B,k,4), completion chunk (B,k), cache).

    vis: (B, 64, 64) in [0,1]; tac: (B, 32, 32) in [0,1]; kin: (B,4) normalized.
    Ablation switches zero the corresponding image feature at the input.
    """
    t = params.tensors
    cfg = params.cfg
    b = kin.shape[0]
    vp = patch_means(vis, VIS_PATCH)
    tp = patch_means(tac, TAC_PATCH)
    f_v = vp @ t["W_vis"] + t["b_vis"]
    f_t = tp @ t["W_tac"] + t["b_tac"]
    if cfg.ablate_vision:
        f_v = np.zeros_like(f_v)
    if cfg.ablate_tactile:
        f_t = np.zeros_like(f_t)
    f_k = kin @ t["W_kin"] + t["b_kin"]
    dec_in = np.concatenate([f_v, f_t, f_k, z], axis=1)
    h1 = np.tanh(dec_in @ t["W_d1"] + t["b_d1"])
    h2 = np.tanh(h1 @ t["W_d2"] + t["b_d2"])
    a_hat = (h2 @ t["W_act"] + t["b_act"]).reshape(b, cfg.chunk, ACTION_DIM)
    logits = h2 @ t["W_cmp"] + t["b_cmp"]
    i_hat = 1.0 / (1.0 + np.exp(-logits))
    cache = {"vp": vp, "tp": tp, "kin": kin, "dec_in": dec_in, "h1": h1, "h2": h2, "i_hat": i_hat}
    return a_hat, i_hat, cache


def normalize_actions(params: PolicyParams, a: np.ndarray) -> np.ndarray:
    return (a - params.action_mean) / params.action_std


def denormalize_actions(params: PolicyParams, a: np.ndarray) -> np.ndarray:
    return a * params.action_std + params.action_mean
