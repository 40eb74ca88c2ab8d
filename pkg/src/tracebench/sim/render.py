"""Top-down orthographic rasterization of the workspace (camera stand-in)."""

from __future__ import annotations

import cv2
import numpy as np

from ..config import SimConfig
from .state import WorldState

BACKGROUND = 30
ROPE_INTENSITY = 255
GRIPPER_INTENSITY = 160
PIN_INTENSITY = 90


def render_visual(world: WorldState, resolution: int, config: SimConfig) -> np.ndarray:
    """Grayscale resolution x resolution image: rope curve, gripper marker, pin marker."""
    if not (32 <= resolution <= 256):
        raise ValueError("resolution must be in [32, 256]")
    x0, y0, x1, y1 = config.workspace
    scale = (resolution - 1) / max(x1 - x0, y1 - y0)

    def to_px(p):
        return int(round((p[0] - x0) * scale)), int(round((p[1] - y0) * scale))

    img = np.full((resolution, resolution), BACKGROUND, dtype=np.uint8)
    cv2.circle(img, to_px(world.rope.particles[0]), max(1, resolution // 48), PIN_INTENSITY, -1)
    cv2.circle(img, to_px(world.gripper.position), max(1, resolution // 32), GRIPPER_INTENSITY, -1)
    pts = np.array([to_px(p) for p in world.rope.particles], dtype=np.int32)
    cv2.polylines(img, [pts], isClosed=False, color=ROPE_INTENSITY, thickness=1, lineType=cv2.LINE_AA)
    return img
