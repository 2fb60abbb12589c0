"""Binary model checkpoints: magic "FKDM", version, named float32 tensors.

Layout (all integers little-endian uint32):

    magic b"FKDM" | version | tensor_count
    per tensor: name_len | name utf-8 | rank | dims... | float32 LE values
    meta_len | metadata JSON utf-8

Values are written row-major. Loading verifies magic, version and exact
byte counts, so truncation and junk files are rejected early.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"FKDM"
VERSION = 1


class CheckpointError(ValueError):
    """Raised on unreadable, truncated or incompatible checkpoint files."""


@dataclass
class Checkpoint:
    """Named float32 tensors plus free-form training metadata."""

    tensors: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    blobs = [MAGIC, struct.pack("<II", VERSION, len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode("utf-8")
        blobs.append(struct.pack("<I", len(encoded)))
        blobs.append(encoded)
        blobs.append(struct.pack("<I", a.ndim))
        blobs.append(struct.pack(f"<{a.ndim}I", *a.shape))
        blobs.append(a.tobytes(order="C"))
    meta = json.dumps(ckpt.metadata, sort_keys=True).encode("utf-8")
    blobs.append(struct.pack("<I", len(meta)))
    blobs.append(meta)
    Path(path).write_bytes(b"".join(blobs))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version} (expected {VERSION})")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        raw = r.take(4 * count)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    if r.pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - r.pos} trailing bytes")
    return Checkpoint(tensors, meta)
