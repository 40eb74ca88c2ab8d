"""Synthetic tactile frames and classical contact-point extraction.

The extraction pipeline follows the usual mask route: Gaussian blur,
binarization, connected components, largest blob, then an ellipse fit on its
contour (preferred) with PCA as the degenerate fallback.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import cv2
import numpy as np

from .config import ExtractionParams, FrameSpec, PRESETS, SimConfig
from .sim.state import WorldState
from .sim.world import contact_point

TACF_MAGIC = b"TACF"
TACF_VERSION = 1
_HEADER = struct.Struct("<4sHHHf2s")  # magic, version, H, W, p2m, reserved

BAND_HALFLEN_PX = 6  # contact patch half-length along the object direction
BAND_BASE = 170
BAND_TEXTURE_AMP = 45
BACKGROUND = 10
NOISE_SIGMA = 4.0


class TactileError(Exception):
    """Malformed tactile frame stream."""


@dataclass(frozen=True)
class TactileFrame:
    pixels: np.ndarray  # (H, W) uint8
    p2m: float
    timestamp: float = 0.0

    @property
    def center(self) -> tuple[float, float]:
        h, w = self.pixels.shape
        return (w / 2.0, h / 2.0)

    def __post_init__(self):
        h, w = self.pixels.shape
        if h % 2 or w % 2:
            raise ValueError("tactile frame dimensions must be even")
        if self.p2m <= 0:
            raise ValueError("p2m must be positive")


class Method(enum.Enum):
    ELLIPSE_FIT = "EllipseFit"
    PCA = "PCA"


@dataclass(frozen=True)
class ContactEstimate:
    p_tac: tuple[float, float]  # sub-pixel (u, v)
    method: Method
    contact_area: float  # blob pixel count
    major_axis_angle: float  # rad


def draw_band(
    img: np.ndarray,
    center: tuple[float, float],
    phi: float,
    half_width: float,
    stripes: float,
    rng: np.random.Generator,
) -> None:
    """Draw a textured contact patch in place: a band of finite length centered
    at ``center`` (sub-pixel u, v), oriented along ``phi``."""
    h, w = img.shape
    half_width = max(1.0, half_width)
    uu, vv = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    du, dv = uu - center[0], vv - center[1]
    along = du * np.cos(phi) + dv * np.sin(phi)
    across = -du * np.sin(phi) + dv * np.cos(phi)
    band = (np.abs(along) <= BAND_HALFLEN_PX) & (np.abs(across) <= half_width)
    phase = rng.uniform(0, 2 * np.pi)
    texture = BAND_BASE + BAND_TEXTURE_AMP * np.sin(2 * np.pi * stripes * along / h + phase)
    img[band] = texture[band]


def render_tactile(world: WorldState, frame_spec: FrameSpec, texture_seed: int, config: SimConfig) -> TactileFrame:
    """Synthesize the sensor image from ground truth.

    When grasping, the grasped segment appears as a bright textured band of
    width diameter*p2m through the true contact pixel, oriented along the local
    rope tangent expressed in the gripper frame. Additive Gaussian pixel noise
    (sigma 4) everywhere, clamped to [0, 255].
    """
    frame_spec.validate()
    h, w = frame_spec.H, frame_spec.W
    rng = np.random.default_rng(texture_seed)
    img = np.full((h, w), float(BACKGROUND))

    contact = contact_point(world)
    if contact is not None:
        preset = PRESETS[config.object_preset]
        uc, vc = w / 2.0, h / 2.0
        # gripper-frame contact: along-axis 0 by construction, lateral from ground truth
        center = (uc, vc + contact.lateral * frame_spec.p2m)
        phi = contact.tangent - float(world.gripper.pose[2])  # band direction in sensor frame
        draw_band(img, center, phi, preset.diameter * frame_spec.p2m / 2.0, preset.texture_stripes, rng)

    img += rng.normal(0.0, NOISE_SIGMA, size=img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return TactileFrame(pixels=pixels, p2m=frame_spec.p2m, timestamp=world.time)


def _pca_estimate(points: np.ndarray, area: float) -> ContactEstimate:
    mean = points.mean(axis=0)
    centered = points - mean
    cov = centered.T @ centered / max(len(points), 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    major = eigvecs[:, np.argmax(eigvals)]
    return ContactEstimate(
        p_tac=(float(mean[0]), float(mean[1])),
        method=Method.PCA,
        contact_area=area,
        major_axis_angle=float(np.arctan2(major[1], major[0])),
    )


def extract_contact(frame: TactileFrame, params: ExtractionParams) -> ContactEstimate | None:
    """Contact localization: blur -> threshold -> largest component -> ellipse fit / PCA."""
    params.validate()
    k = max(3, int(2 * round(3 * params.gaussian_sigma) + 1))
    blurred = cv2.GaussianBlur(frame.pixels, (k, k), params.gaussian_sigma)
    _, binary = cv2.threshold(blurred, params.binarize_threshold, 255, cv2.THRESH_BINARY)

    n_labels, labels, stats, _ = cv2.connectedComponentsWithStats(binary, connectivity=8)
    if n_labels < 2:
        return None
    areas = stats[1:, cv2.CC_STAT_AREA]
    best = 1 + int(np.argmax(areas))
    area = float(areas[best - 1])
    if area < params.min_area:
        return None

    mask = (labels == best).astype(np.uint8)
    contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    contour = max(contours, key=cv2.contourArea).reshape(-1, 2).astype(float)

    if len(contour) >= params.ellipse_min_points:
        ellipse = cv2.fitEllipse(contour.astype(np.float32))
        (eu, ev), (minor, major), angle_deg = ellipse
        if np.isfinite(eu) and np.isfinite(ev) and major > 0:
            h, w = frame.pixels.shape
            if 0 <= eu < w and 0 <= ev < h:
                # fitEllipse angle is the minor-axis direction in degrees
                return ContactEstimate(
                    p_tac=(float(eu), float(ev)),
                    method=Method.ELLIPSE_FIT,
                    contact_area=area,
                    major_axis_angle=float(np.deg2rad(angle_deg + 90.0)),
                )
    return _pca_estimate(contour, area)


def pixel_to_gripper(p_tac: tuple[float, float], frame: TactileFrame) -> np.ndarray:
    """Sensor pixel -> gripper-frame meters; the planar task keeps z at 0."""
    uc, vc = frame.center
    u, v = p_tac
    return np.array([(u - uc) / frame.p2m, (v - vc) / frame.p2m, 0.0])


def gripper_to_world(p_gripper: np.ndarray, pose: np.ndarray) -> np.ndarray:
    """Homogeneous SE(2) transform of a gripper-frame point into the world frame."""
    x, y, th = float(pose[0]), float(pose[1]), float(pose[2])
    c, s = np.cos(th), np.sin(th)
    px, py = float(p_gripper[0]), float(p_gripper[1])
    return np.array([x + c * px - s * py, y + s * px + c * py, 0.0])


def world_to_gripper(p_world: np.ndarray, pose: np.ndarray) -> np.ndarray:
    """Inverse of gripper_to_world."""
    x, y, th = float(pose[0]), float(pose[1]), float(pose[2])
    c, s = np.cos(th), np.sin(th)
    dx, dy = float(p_world[0]) - x, float(p_world[1]) - y
    return np.array([c * dx + s * dy, -s * dx + c * dy, 0.0])


def encode_frame(frame: TactileFrame) -> bytes:
    h, w = frame.pixels.shape
    header = _HEADER.pack(TACF_MAGIC, TACF_VERSION, h, w, np.float32(frame.p2m), b"\x00\x00")
    return header + frame.pixels.tobytes()


def decode_frames(data: bytes, rate_hz: float = 30.0) -> list[TactileFrame]:
    """Decode a concatenated frame stream; timestamps are reconstructed from the rate."""
    frames = []
    off = 0
    idx = 0
    while off < len(data):
        if len(data) - off < _HEADER.size:
            raise TactileError("truncated tactile header")
        magic, version, h, w, p2m, _ = _HEADER.unpack_from(data, off)
        if magic != TACF_MAGIC:
            raise TactileError(f"bad tactile magic {magic!r}")
        if version != TACF_VERSION:
            raise TactileError(f"unsupported tactile version {version}")
        off += _HEADER.size
        if len(data) - off < h * w:
            raise TactileError("truncated tactile payload")
        pixels = np.frombuffer(data[off : off + h * w], dtype=np.uint8).reshape(h, w).copy()
        off += h * w
        frames.append(TactileFrame(pixels=pixels, p2m=float(np.float32(p2m)), timestamp=idx / rate_hz))
        idx += 1
    return frames
