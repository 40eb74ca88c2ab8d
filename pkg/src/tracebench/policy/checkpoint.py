"""Policy checkpoint file: versioned header + named float32 tensor blocks.

Layout: magic "TBCK", version u16, u32 JSON header length, UTF-8 JSON header
(train config echo, normalization statistics, tensor manifest in order), then
the concatenated float32 little-endian tensor payloads.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from ..config import TrainConfig
from .network import PolicyParams

MAGIC = b"TBCK"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(params: PolicyParams, path: str | Path) -> None:
    header = {
        "config": dataclasses.asdict(params.cfg),
        "action_mean": params.action_mean.tolist(),
        "action_std": params.action_std.tolist(),
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in params.tensors.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", VERSION, len(blob)))
        f.write(blob)
        for v in params.tensors.values():
            f.write(v.astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> PolicyParams:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError("bad checkpoint magic")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 10
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    cfg = TrainConfig(**header["config"])
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape))
        if len(data) - off < n * 4:
            raise CheckpointError("truncated checkpoint payload")
        tensors[entry["name"]] = (
            np.frombuffer(data[off : off + n * 4], dtype="<f4").astype(float).reshape(shape)
        )
        off += n * 4
    return PolicyParams(
        tensors=tensors,
        cfg=cfg,
        action_mean=np.array(header["action_mean"], dtype=float),
        action_std=np.array(header["action_std"], dtype=float),
    )
