"""Wire protocol of the teleoperation bridge.

Transport: one WebSocket connection per client.  Every message is a UTF-8 JSON
text frame; image-bearing messages (``tactile``, ``visual``) are a JSON header
frame announcing dtype/shape, immediately followed by one binary frame with the
raw row-major pixel payload.

Stream message types (server -> client): state, tactile, visual, alert,
recording, ack, error.  Command message types (client -> server): move, grip,
record, reset.  ``seq`` is strictly increasing per connection; commands carry a
``client_seq`` echoed back in errors.
"""

from __future__ import annotations

from typing import Any

import numpy as np

PROTOCOL_VERSION = 1

STREAM_TYPES = ("state", "tactile", "visual", "alert", "recording", "ack", "error")
COMMAND_TYPES = ("move", "grip", "record", "reset")


class ProtocolError(Exception):
    """Malformed client message (reported back, never fatal to the connection)."""


def state_payload(world, config, completion: float, w: float, alert: bool,
                  recording: bool, contact: dict | None, tick: int) -> dict:
    """Project a WorldState onto the wire schema (rope capped at 64 points)."""
    pts = world.rope.particles
    if len(pts) > 64:
        idx = np.linspace(0, len(pts) - 1, 64).round().astype(int)
        pts = pts[idx]
    return {
        "tick": tick,
        "status": world.status.name,
        "pose": [float(x) for x in world.gripper.pose],
        "aperture": float(world.gripper.aperture),
        "grasping": bool(world.gripper.grasping),
        "rope": [[float(x), float(y)] for x, y in pts],
        "pin": [float(world.rope.particles[0][0]), float(world.rope.particles[0][1])],
        "contact": contact,
        "completion": float(completion),
        "manipulability": float(w),
        "alert": bool(alert),
        "recording": bool(recording),
        "velocity_limit": float(config.max_speed),
        "yaw_rate_limit": float(config.max_yaw_rate),
    }


def encode_image_payload(msg_type: str, seq: int, time_s: float, pixels: np.ndarray,
                         extra: dict | None = None) -> tuple[dict, bytes]:
    """Header + binary frame pair for a tactile/visual image message."""
    header = {
        "type": msg_type,
        "seq": seq,
        "time": time_s,
        "binary": {"dtype": "u8", "shape": list(pixels.shape)},
    }
    if extra:
        header["payload"] = extra
    return header, np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def decode_image_payload(header: dict, blob: bytes) -> np.ndarray:
    shape = tuple(header["binary"]["shape"])
    expected = int(np.prod(shape))
    if len(blob) != expected:
        raise ProtocolError(f"binary payload length {len(blob)} != {expected}")
    return np.frombuffer(blob, dtype=np.uint8).reshape(shape)


def _require_number(msg: dict, key: str) -> float:
    v = msg.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
        raise ProtocolError(f"field {key!r} must be a finite number")
    return float(v)


def parse_command(msg: Any) -> dict:
    """Validate a client command; raises ProtocolError on malformed input."""
    if not isinstance(msg, dict):
        raise ProtocolError("command must be a JSON object")
    ctype = msg.get("type")
    if ctype not in COMMAND_TYPES:
        raise ProtocolError(f"unknown command type {ctype!r}")
    out: dict = {"type": ctype, "client_seq": msg.get("client_seq")}
    if ctype == "move":
        out["dx"] = _require_number(msg, "dx")
        out["dy"] = _require_number(msg, "dy")
        out["dtheta"] = _require_number(msg, "dtheta")
    elif ctype == "grip":
        out["aperture"] = _require_number(msg, "aperture")
    elif ctype == "record":
        action = msg.get("action")
        if action not in ("start", "stop"):
            raise ProtocolError("record action must be 'start' or 'stop'")
        out["action"] = action
    elif ctype == "reset":
        seed = msg.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ProtocolError("reset requires an integer seed")
        out["seed"] = seed
        preset = msg.get("preset")
        if preset is not None and not isinstance(preset, str):
            raise ProtocolError("reset preset must be a string")
        out["preset"] = preset
    return out


def clamp_move(dx: float, dy: float, dtheta: float, config) -> tuple[float, float, float]:
    """Server-side clamp of a per-tick delta to the velocity/yaw-rate limits."""
    max_d = config.max_speed * config.dt
    norm = float(np.hypot(dx, dy))
    if norm > max_d and norm > 0:
        dx, dy = dx * max_d / norm, dy * max_d / norm
    max_dtheta = config.max_yaw_rate * config.dt
    dtheta = float(np.clip(dtheta, -max_dtheta, max_dtheta))
    return float(dx), float(dy), dtheta
