"""Realtime teleoperation bridge between the simulator and the browser console."""

from .protocol import (
    PROTOCOL_VERSION,
    decode_image_payload,
    encode_image_payload,
    parse_command,
)
from .server import SessionServer, serve_forever

__all__ = [
    "PROTOCOL_VERSION",
    "SessionServer",
    "serve_forever",
    "parse_command",
    "encode_image_payload",
    "decode_image_payload",
]
