"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"CPGC"  u32 version  u64 metadata length  metadata (UTF-8 JSON)
    u32 tensor count
    per tensor: u32 name length, name (UTF-8), u8 dtype tag, u8 rank,
                rank x u64 extents, raw little-endian buffer
"""

from __future__ import annotations

import io
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError, CheckpointVersionError, CorruptCheckpointError, PathError

MAGIC = b"CPGC"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8")}
_TAGS = {np.dtype("float32"): 1, np.dtype("float64"): 2, np.dtype("int64"): 3}


@dataclass
class Checkpoint:
    metadata: dict
    tensors: OrderedDict = field(default_factory=OrderedDict)

    def tensor_names(self, prefix: str = "") -> list[str]:
        return [n for n in self.tensors if n.startswith(prefix)]


def dumps(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    meta = json.dumps(ckpt.metadata, sort_keys=True, ensure_ascii=False).encode("utf-8")
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", VERSION, len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<I", len(ckpt.tensors)))
    for name, arr in ckpt.tensors.items():
        arr = np.asarray(arr)
        tag = _TAGS.get(arr.dtype)
        if tag is None:
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<BB", tag, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptCheckpointError(f"{self.source}: truncated checkpoint container")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes, source: str = "<bytes>") -> Checkpoint:
    r = _Reader(data, source)
    if len(data) < 4 or r.take(4) != MAGIC:
        raise CorruptCheckpointError(f"{source}: bad magic, not a checkpoint container")
    version, meta_len = r.unpack("<IQ")
    if version != VERSION:
        raise CheckpointVersionError(f"{source}: checkpoint version {version} is not supported (expected {VERSION})")
    try:
        metadata = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{source}: unreadable metadata ({exc})") from None
    (count,) = r.unpack("<I")
    tensors = OrderedDict()
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8", errors="strict")
        tag, rank = r.unpack("<BB")
        if tag not in _DTYPES:
            raise CorruptCheckpointError(f"{source}: tensor {name!r} has unknown dtype tag {tag}")
        shape = r.unpack(f"<{rank}Q")
        dtype = _DTYPES[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(r.take(nbytes), dtype=dtype).reshape(shape)
        tensors[name] = arr.astype(dtype.newbyteorder("="), copy=True)
    if r.pos != len(data):
        raise CorruptCheckpointError(f"{source}: trailing bytes after the last tensor")
    return Checkpoint(metadata, tensors)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(ckpt))
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise PathError(f"checkpoint not found: {path}")
    return loads(path.read_bytes(), str(path))
