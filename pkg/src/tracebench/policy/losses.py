"""Composite policy loss: weighted-MAE center loss, KL regularizer, completion MSE.

total = center + lambda_reg * reg + lambda_task * task, averaged over the batch,
with exact analytic gradients for every parameter tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ACTION_DIM, PolicyParams, decode, encode, reparameterize


class DivergenceError(Exception):
    """Non-finite loss encountered."""


@dataclass(frozen=True)
class Batch:
    vis: np.ndarray  # (B, 64, 64) float in [0, 1]
    tac: np.ndarray  # (B, 32, 32) float in [0, 1]
    kin: np.ndarray  # (B, 4) normalized
    actions: np.ndarray  # (B, k, 4) normalized
    weights: np.ndarray  # (B, k)
    completion: np.ndarray  # (B, k)

    def __len__(self) -> int:
        return self.kin.shape[0]


@dataclass(frozen=True)
class LossBreakdown:
    center: float
    reg: float
    task: float
    total: float
    lambda_reg: float
    lambda_task: float


def kl_loss(mu: np.ndarray, logsig: np.ndarray) -> float:
    """Closed-form KL(N(mu, sig) || N(0, I)) summed over latent dims."""
    sig2 = np.exp(2.0 * logsig)
    return float(0.5 * np.sum(mu**2 + sig2 - 1.0 - 2.0 * logsig))


def center_loss(a_hat: np.ndarray, a: np.ndarray, weights: np.ndarray) -> float:
    """(1/k) sum_t w_t * MAE_t; with all weights 1 this is the plain chunk MAE."""
    if a_hat.shape != a.shape or weights.shape != a.shape[:-1]:
        raise ValueError("shape mismatch")
    mae_t = np.mean(np.abs(a_hat - a), axis=-1)
    return float(np.mean(weights * mae_t, axis=-1))


def task_loss(i_hat: np.ndarray, i: np.ndarray) -> float:
    """MSE over the k-step completion sequence."""
    if i_hat.shape != i.shape:
        raise ValueError("shape mismatch")
    return float(np.mean((i_hat - i) ** 2))


def total_loss(
    params: PolicyParams,
    batch: Batch,
    eps: np.ndarray,
    with_grads: bool = True,
) -> tuple[LossBreakdown, dict[str, np.ndarray] | None]:
    """Batch loss and exact gradients w.r.t. every parameter tensor.

    eps: (B, d_z) reparameterization noise (pass zeros for deterministic eval).
    """
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    cfg = params.cfg
    t = params.tensors
    b = len(batch)
    k = cfg.chunk
    lam_r = cfg.lambda_reg
    lam_t = 0.0 if cfg.ablate_task else cfg.lambda_task
    w = np.ones_like(batch.weights) if cfg.ablate_center else batch.weights

    mu, logsig, ec = encode(params, batch.kin, batch.actions)
    z = reparameterize(mu, logsig, eps)
    a_hat, i_hat, dc = decode(params, batch.vis, batch.tac, batch.kin, z)

    diff = a_hat - batch.actions
    mae_t = np.mean(np.abs(diff), axis=2)  # (B, k)
    center = float(np.mean(np.mean(w * mae_t, axis=1)))
    sig2 = np.exp(2.0 * logsig)
    reg = float(np.mean(0.5 * np.sum(mu**2 + sig2 - 1.0 - 2.0 * logsig, axis=1)))
    task = float(np.mean(np.mean((i_hat - batch.completion) ** 2, axis=1)))
    total = center + lam_r * reg + lam_t * task
    breakdown = LossBreakdown(center=center, reg=reg, task=task, total=total, lambda_reg=lam_r, lambda_task=lam_t)
    if not np.isfinite(total):
        raise DivergenceError(f"non-finite loss: {breakdown}")
    if not with_grads:
        return breakdown, None

    grads = {name: np.zeros_like(arr) for name, arr in t.items()}

    # heads
    d_a_hat = np.sign(diff) * w[:, :, None] / (ACTION_DIM * k * b)  # (B, k, 4)
    d_logits = lam_t * 2.0 * (i_hat - batch.completion) / (k * b) * i_hat * (1.0 - i_hat)
    g_act = d_a_hat.reshape(b, k * ACTION_DIM)
    grads["W_act"] = dc["h2"].T @ g_act
    grads["b_act"] = g_act.sum(axis=0)
    grads["W_cmp"] = dc["h2"].T @ d_logits
    grads["b_cmp"] = d_logits.sum(axis=0)

    # decoder trunk
    dh2 = g_act @ t["W_act"].T + d_logits @ t["W_cmp"].T
    dh2 *= 1.0 - dc["h2"] ** 2
    grads["W_d2"] = dc["h1"].T @ dh2
    grads["b_d2"] = dh2.sum(axis=0)
    dh1 = dh2 @ t["W_d2"].T
    dh1 *= 1.0 - dc["h1"] ** 2
    grads["W_d1"] = dc["dec_in"].T @ dh1
    grads["b_d1"] = dh1.sum(axis=0)
    ddec_in = dh1 @ t["W_d1"].T

    v, tc_, kd, dz_dim = cfg.vis_dim, cfg.tac_dim, cfg.kin_dim, cfg.latent_dim
    df_v = ddec_in[:, :v]
    df_t = ddec_in[:, v : v + tc_]
    df_k = ddec_in[:, v + tc_ : v + tc_ + kd].copy()
    dz = ddec_in[:, v + tc_ + kd :]

    if not cfg.ablate_vision:
        grads["W_vis"] = dc["vp"].T @ df_v
        grads["b_vis"] = df_v.sum(axis=0)
    if not cfg.ablate_tactile:
        grads["W_tac"] = dc["tp"].T @ df_t
        grads["b_tac"] = df_t.sum(axis=0)

    # latent path + KL
    dmu = dz + lam_r * mu / b
    dlogsig = dz * eps * np.exp(logsig) + lam_r * (sig2 - 1.0) / b
    dmulog = np.concatenate([dmu, dlogsig], axis=1)
    grads["W_e2"] = ec["h"].T @ dmulog
    grads["b_e2"] = dmulog.sum(axis=0)
    dh = dmulog @ t["W_e2"].T
    dh *= 1.0 - ec["h"] ** 2
    grads["W_e1"] = ec["enc_in"].T @ dh
    grads["b_e1"] = dh.sum(axis=0)
    df_k += (dh @ t["W_e1"].T)[:, k * ACTION_DIM :]

    grads["W_kin"] = batch.kin.T @ df_k
    grads["b_kin"] = df_k.sum(axis=0)
    return breakdown, grads
