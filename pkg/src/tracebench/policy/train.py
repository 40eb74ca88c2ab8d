"""Training loop: Adam on the composite loss with seeded chunk sampling.

One epoch = ``batches_per_epoch`` optimizer steps on randomly sampled
(episode, start) chunks; validation loss is computed each epoch on a fixed
held-out chunk set and the lowest-validation checkpoint is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import TrainConfig
from ..labeling import LabeledEpisode
from .losses import Batch, DivergenceError, total_loss
from .network import ACTION_DIM, PolicyParams, init_params

VAL_SAMPLES = 128


class TrainingDiverged(Exception):
    def __init__(self, epoch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


@dataclass
class EpisodeArrays:
    """Flat per-episode training arrays."""

    kin: np.ndarray  # (T, 4) float64
    actions: np.ndarray  # (T, 4)
    weights: np.ndarray  # (T,)
    completion: np.ndarray  # (T,)
    visual: np.ndarray  # (T, 64, 64) uint8
    tactile: np.ndarray  # (T, 32, 32) uint8


def episode_arrays(ep: LabeledEpisode) -> EpisodeArrays:
    obs = [o for o, _ in ep.episode.steps]
    return EpisodeArrays(
        kin=np.stack([o.kinematic for o in obs]).astype(float),
        actions=np.stack([a for _, a in ep.episode.steps]).astype(float),
        weights=ep.weights.astype(float),
        completion=ep.completion.astype(float),
        visual=np.stack([o.visual for o in obs]),
        tactile=np.stack([o.tactile.pixels for o in obs]),
    )


def chunk_slice(arr: np.ndarray, t: int, k: int) -> np.ndarray:
    """arr[t:t+k] padded by repeating the final row."""
    out = arr[t : t + k]
    if len(out) < k:
        pad = np.repeat(out[-1:], k - len(out), axis=0)
        out = np.concatenate([out, pad], axis=0)
    return out


def augment_image(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Brightness/contrast/gamma randomization on a [0,1] float image."""
    gamma = rng.uniform(0.8, 1.25)
    contrast = rng.uniform(0.8, 1.25)
    brightness = rng.uniform(-0.2, 0.2)
    out = np.power(img, gamma)
    out = (out - 0.5) * contrast + 0.5 + brightness
    return np.clip(out, 0.0, 1.0)


def build_batch(
    episodes: list[EpisodeArrays],
    picks: list[tuple[int, int]],
    params: PolicyParams,
    rng: np.random.Generator | None,
    augment: bool,
) -> Batch:
    """Assemble (episode, start) picks into a training batch (normalized)."""
    k = params.cfg.chunk
    vis, tac, kin, act, wts, cmp_ = [], [], [], [], [], []
    for ei, t in picks:
        e = episodes[ei]
        v = e.visual[t] / 255.0
        tc = e.tactile[t] / 255.0
        if augment and rng is not None:
            v = augment_image(v, rng)
            tc = augment_image(tc, rng)
        vis.append(v)
        tac.append(tc)
        kin.append((e.kin[t] - params.action_mean) / params.action_std)
        act.append((chunk_slice(e.actions, t, k) - params.action_mean) / params.action_std)
        wts.append(chunk_slice(e.weights[:, None], t, k)[:, 0])
        cmp_.append(chunk_slice(e.completion[:, None], t, k)[:, 0])
    return Batch(
        vis=np.stack(vis),
        tac=np.stack(tac),
        kin=np.stack(kin),
        actions=np.stack(act),
        weights=np.stack(wts),
        completion=np.stack(cmp_),
    )


class Adam:
    def __init__(self, tensors: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.t = 0

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            tensors[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class TrainResult:
    params: PolicyParams  # lowest-validation-loss checkpoint
    train_curve: list[float] = field(default_factory=list)  # mean batch total per epoch
    val_curve: list[float] = field(default_factory=list)
    center_curve: list[float] = field(default_factory=list)
    best_epoch: int = -1


def train(dataset: list[LabeledEpisode], cfg: TrainConfig) -> TrainResult:
    """Train on labeled episodes; fixed seed gives identical curves and weights."""
    if not dataset:
        raise ValueError("dataset must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    episodes = [episode_arrays(e) for e in dataset]

    # 90/10 train/validation split by episode (seeded); tiny sets validate on train
    order = rng.permutation(len(episodes))
    n_val = int(round(cfg.val_fraction * len(episodes)))
    if len(episodes) >= 2 and n_val == 0:
        n_val = 1
    val_idx = list(order[:n_val]) if n_val else list(range(len(episodes)))
    train_idx = list(order[n_val:]) if n_val else list(range(len(episodes)))

    stats_actions = np.concatenate([episodes[i].actions for i in train_idx], axis=0)
    mean = stats_actions.mean(axis=0)
    std = np.maximum(stats_actions.std(axis=0), 1e-6)
    params = init_params(cfg, cfg.seed, action_mean=mean, action_std=std)

    train_picks = [(i, t) for i in train_idx for t in range(len(episodes[i].kin))]
    val_picks_all = [(i, t) for i in val_idx for t in range(len(episodes[i].kin))]
    val_rng = np.random.default_rng(cfg.seed + 7919)
    if len(val_picks_all) > VAL_SAMPLES:
        sel = val_rng.choice(len(val_picks_all), size=VAL_SAMPLES, replace=False)
        val_picks = [val_picks_all[j] for j in sel]
    else:
        val_picks = val_picks_all
    val_batch = build_batch(episodes, val_picks, params, None, augment=False)
    val_eps = np.zeros((len(val_picks), cfg.latent_dim))

    opt = Adam(params.tensors, cfg.lr)
    result = TrainResult(params=params.copy())
    best_val = np.inf

    for epoch in range(cfg.epochs):
        epoch_losses = []
        epoch_centers = []
        for _ in range(cfg.batches_per_epoch):
            sel = rng.integers(0, len(train_picks), size=cfg.batch_size)
            picks = [train_picks[j] for j in sel]
            batch = build_batch(episodes, picks, params, rng, augment=cfg.augment)
            eps = rng.standard_normal((len(picks), cfg.latent_dim))
            try:
                breakdown, grads = total_loss(params, batch, eps)
            except DivergenceError as e:
                raise TrainingDiverged(epoch, str(e)) from e
            opt.step(params.tensors, grads)
            epoch_losses.append(breakdown.total)
            epoch_centers.append(breakdown.center)
        val_breakdown, _ = total_loss(params, val_batch, val_eps, with_grads=False)
        result.train_curve.append(float(np.mean(epoch_losses)))
        result.center_curve.append(float(np.mean(epoch_centers)))
        result.val_curve.append(val_breakdown.total)
        if val_breakdown.total < best_val:
            best_val = val_breakdown.total
            result.params = params.copy()
            result.best_epoch = epoch
    return result
