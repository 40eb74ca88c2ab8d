"""Demonstration labeling (center weights, completion indices) and dataset I/O.

The weight normalizer divides the pixel eccentricity by the norm of the image
center ||c||_2, read off the weight-factor definition so the exponent is
dimensionless; an image half-width normalizer is available as a config knob.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExtractionParams
from .tactile import ContactEstimate, TactileFrame, decode_frames, encode_frame, extract_contact, gripper_to_world, pixel_to_gripper

DATASET_VERSION = 1
W_FLOOR = math.exp(-1.0)  # lost contact treated as maximally eccentric


class DatasetError(Exception):
    """Base class for dataset format problems."""


class DatasetVersionError(DatasetError):
    pass


class DatasetCorruptError(DatasetError):
    """Bad magic bytes or truncated stream."""


class DatasetInconsistentError(DatasetError):
    """Streams or manifest entries disagree in length/count."""


class LabelingError(Exception):
    """Episode cannot be labeled (e.g. no contact in the final frame)."""


@dataclass(frozen=True)
class Observation:
    kinematic: np.ndarray  # (4,) float32: EE x, y, theta, aperture
    visual: np.ndarray  # (R, R) uint8
    tactile: TactileFrame


@dataclass(frozen=True)
class Episode:
    steps: list[tuple[Observation, np.ndarray]]  # (obs, action (4,) float32)
    p_0: np.ndarray  # (2,) world point
    rate_hz: float
    object_preset: str
    seed: int

    def __post_init__(self):
        if len(self.steps) < 2:
            raise ValueError("an episode needs at least 2 steps")

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class LabeledEpisode:
    episode: Episode
    weights: np.ndarray  # (T,) float32 in (0, 1]
    completion: np.ndarray  # (T,) float32 in [0, 1]
    contact_found: np.ndarray  # (T,) bool


def center_weight(estimate: ContactEstimate | None, frame: TactileFrame, normalizer: str = "center_norm") -> float:
    """Exponential weight favoring contacts near the sensing-region center."""
    if estimate is None:
        return W_FLOOR
    uc, vc = frame.center
    if normalizer == "center_norm":
        norm = math.hypot(uc, vc)
    elif normalizer == "half_width":
        norm = frame.pixels.shape[1] / 2.0
    else:
        raise ValueError(f"unknown weight normalizer {normalizer!r}")
    dist = math.hypot(estimate.p_tac[0] - uc, estimate.p_tac[1] - vc)
    return math.exp(-dist / norm)


def completion_index(p_t: np.ndarray, p_0: np.ndarray, p_T: np.ndarray) -> float:
    """Clamped ratio of currently traced distance to total traced distance."""
    total = float(np.linalg.norm(np.asarray(p_T)[:2] - np.asarray(p_0)[:2]))
    if total <= 0.0:
        raise LabelingError("degenerate demonstration: final contact coincides with the pinned point")
    d = float(np.linalg.norm(np.asarray(p_t)[:2] - np.asarray(p_0)[:2]))
    return min(max(d / total, 0.0), 1.0)


def label_episode(ep: Episode, params: ExtractionParams, normalizer: str = "center_norm") -> LabeledEpisode:
    """Per-step weights and completion indices from the tactile stream.

    Missing-contact steps keep chunk alignment: w falls to the floor and the
    completion index holds its previous value.
    """
    estimates: list[ContactEstimate | None] = []
    world_points: list[np.ndarray | None] = []
    for obs, _ in ep.steps:
        est = extract_contact(obs.tactile, params)
        estimates.append(est)
        if est is None:
            world_points.append(None)
        else:
            pose = obs.kinematic[:3].astype(float)
            p = gripper_to_world(pixel_to_gripper(est.p_tac, obs.tactile), pose)
            world_points.append(p[:2])

    if world_points[-1] is None:
        raise LabelingError("final step has no extractable contact; cannot establish the trace end")
    p_T = world_points[-1]

    weights = np.empty(len(ep.steps), dtype=np.float32)
    completion = np.empty(len(ep.steps), dtype=np.float32)
    found = np.zeros(len(ep.steps), dtype=bool)
    last_i = 0.0
    for t, (est, p_t) in enumerate(zip(estimates, world_points)):
        weights[t] = center_weight(est, ep.steps[t][0].tactile, normalizer)
        if p_t is None:
            completion[t] = last_i  # hold-last
        else:
            found[t] = True
            last_i = completion_index(p_t, ep.p_0, p_T)
            completion[t] = last_i
    return LabeledEpisode(episode=ep, weights=weights, completion=completion, contact_found=found)


# ---------------------------------------------------------------------------
# on-disk format


def _episode_dir(i: int) -> str:
    return f"ep_{i:04d}"


def write_dataset(episodes: list[LabeledEpisode], path: str | Path, config_echo: dict | None = None) -> dict:
    """Write the bit-exact dataset layout; returns the manifest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    names = []
    for i, lep in enumerate(episodes):
        name = _episode_dir(i)
        names.append(name)
        d = path / name
        d.mkdir(exist_ok=True)
        ep = lep.episode
        obs0 = ep.steps[0][0]
        meta = {
            "n_steps": len(ep),
            "object_preset": ep.object_preset,
            "p_0": [float(ep.p_0[0]), float(ep.p_0[1])],
            "rate_hz": ep.rate_hz,
            "seed": ep.seed,
            "visual_resolution": int(obs0.visual.shape[0]),
        }
        (d / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
        kin = np.stack([np.concatenate([o.kinematic, a]) for o, a in ep.steps]).astype("<f4")
        (d / "kin.f32").write_bytes(kin.tobytes())
        labels = np.stack(
            [lep.weights, lep.completion, lep.contact_found.astype(np.float32)], axis=1
        ).astype("<f4")
        (d / "labels.f32").write_bytes(labels.tobytes())
        (d / "visual.u8").write_bytes(b"".join(o.visual.tobytes() for o, _ in ep.steps))
        (d / "tactile.tacf").write_bytes(b"".join(encode_frame(o.tactile) for o, _ in ep.steps))
    manifest = {
        "version": DATASET_VERSION,
        "episodes": names,
        "config": config_echo or {},
    }
    (path / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
    return manifest


def read_dataset(path: str | Path) -> list[LabeledEpisode]:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetCorruptError(f"no manifest.json under {path}") from None
    if manifest.get("version") != DATASET_VERSION:
        raise DatasetVersionError(f"dataset version {manifest.get('version')} != {DATASET_VERSION}")
    episodes = []
    for name in manifest["episodes"]:
        d = path / name
        if not d.is_dir():
            raise DatasetInconsistentError(f"manifest lists {name} but the directory is missing")
        meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
        n = int(meta["n_steps"])
        res = int(meta["visual_resolution"])
        rate = float(meta["rate_hz"])

        kin_bytes = (d / "kin.f32").read_bytes()
        if len(kin_bytes) != n * 8 * 4:
            raise DatasetInconsistentError(f"{name}/kin.f32 length mismatch")
        kin = np.frombuffer(kin_bytes, dtype="<f4").reshape(n, 8)

        label_bytes = (d / "labels.f32").read_bytes()
        if len(label_bytes) != n * 3 * 4:
            raise DatasetInconsistentError(f"{name}/labels.f32 length mismatch")
        labels = np.frombuffer(label_bytes, dtype="<f4").reshape(n, 3)

        vis_bytes = (d / "visual.u8").read_bytes()
        if len(vis_bytes) != n * res * res:
            raise DatasetInconsistentError(f"{name}/visual.u8 length mismatch")
        visual = np.frombuffer(vis_bytes, dtype=np.uint8).reshape(n, res, res)

        try:
            frames = decode_frames((d / "tactile.tacf").read_bytes(), rate_hz=rate)
        except Exception as e:
            raise DatasetCorruptError(f"{name}/tactile.tacf: {e}") from e
        if len(frames) != n:
            raise DatasetInconsistentError(f"{name}/tactile.tacf frame count mismatch")

        steps = [
            (Observation(kinematic=kin[t, :4].copy(), visual=visual[t].copy(), tactile=frames[t]), kin[t, 4:].copy())
            for t in range(n)
        ]
        ep = Episode(
            steps=steps,
            p_0=np.array(meta["p_0"], dtype=float),
            rate_hz=rate,
            object_preset=meta["object_preset"],
            seed=int(meta["seed"]),
        )
        episodes.append(
            LabeledEpisode(
                episode=ep,
                weights=labels[:, 0].copy(),
                completion=labels[:, 1].copy(),
                contact_found=labels[:, 2] != 0.0,
            )
        )
    return episodes


def labeled_episodes_equal(a: LabeledEpisode, b: LabeledEpisode) -> bool:
    """Bit-exact comparison used by round-trip tests."""
    if len(a.episode) != len(b.episode):
        return False
    if not (
        np.array_equal(a.weights, b.weights)
        and np.array_equal(a.completion, b.completion)
        and np.array_equal(a.contact_found, b.contact_found)
        and np.array_equal(a.episode.p_0, b.episode.p_0)
        and a.episode.rate_hz == b.episode.rate_hz
        and a.episode.object_preset == b.episode.object_preset
        and a.episode.seed == b.episode.seed
    ):
        return False
    for (oa, aa), (ob, ab) in zip(a.episode.steps, b.episode.steps):
        if not (
            np.array_equal(oa.kinematic, ob.kinematic)
            and np.array_equal(oa.visual, ob.visual)
            and np.array_equal(oa.tactile.pixels, ob.tactile.pixels)
            and oa.tactile.p2m == ob.tactile.p2m
            and oa.tactile.timestamp == ob.tactile.timestamp
            and np.array_equal(aa, ab)
        ):
            return False
    return True
