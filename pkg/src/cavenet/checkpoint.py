"""Self-describing binary checkpoint container.

Layout (all integers little-endian):

    magic   8 bytes  b"CAVECKP1"
    version u32      (currently 1; mismatch is a hard error)
    kind    u32 length + utf-8 bytes   (model kind tag)
    meta    u32 length + utf-8 JSON    (seed, epochs, config hash, ...)
    nblocks u32
    per block:
        name  u32 length + utf-8 bytes
        dtype u8                      (0=f32, 1=f64, 2=i32)
        ndim  u32
        dims  u64 * ndim
        payload                       (raw array bytes, C order)

Round-tripping reproduces every parameter block bitwise.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

MAGIC = b"CAVECKP1"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i4")}
_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.int32): 2}


class CheckpointError(ValueError):
    """Checkpoint cannot be written or parsed."""


def config_hash(config: dict) -> str:
    """Stable hash of a flat configuration mapping."""
    lines = "".join(f"{k}={config[k]}\n" for k in sorted(config))
    return hashlib.sha256(lines.encode("utf-8")).hexdigest()


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(path: str, kind: str, params: dict[str, np.ndarray],
                    meta: dict) -> None:
    chunks = [MAGIC, struct.pack("<I", VERSION), _pack_str(kind),
              _pack_str(json.dumps(meta, sort_keys=True)),
              struct.pack("<I", len(params))]
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in _DTYPE_TAGS:
            raise CheckpointError(f"block {name!r}: unsupported dtype {arr.dtype}")
        chunks.append(_pack_str(name))
        chunks.append(struct.pack("<BI", _DTYPE_TAGS[arr.dtype], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def load_checkpoint(path: str) -> tuple[str, dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, path)
    if r.take(8) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version} != "
                              f"supported {VERSION}")
    kind = r.string()
    meta = json.loads(r.string())
    nblocks = r.u32()
    params: dict[str, np.ndarray] = {}
    for _ in range(nblocks):
        name = r.string()
        tag, ndim = struct.unpack("<BI", r.take(5))
        if tag not in _DTYPES:
            raise CheckpointError(f"{path}: block {name!r} has unknown dtype tag {tag}")
        dims = struct.unpack(f"<{ndim}Q", r.take(8 * ndim))
        dtype = _DTYPES[tag]
        count = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(r.take(count * dtype.itemsize), dtype=dtype)
        params[name] = arr.reshape(dims).copy()
    return kind, params, meta
