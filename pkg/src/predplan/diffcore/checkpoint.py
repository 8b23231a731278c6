"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    b"PPCK"  u32 version  32-byte config digest  u64 step  u32 n_params
    per parameter: u32 name_len, UTF-8 name, u32 rank, u64 dims[rank],
                   float64 data (little-endian, row-major)
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .params import ParamStore

MAGIC = b"PPCK"
FORMAT_VERSION = 1


def config_digest(config) -> bytes:
    """SHA-256 over the canonical JSON encoding of ``config``."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).digest()


@dataclass
class CheckpointHeader:
    version: int
    digest: bytes
    step: int


def dumps(store: ParamStore, step: int = 0, digest: bytes = b"\0" * 32) -> bytes:
    if len(digest) != 32:
        raise ValueError("config digest must be 32 bytes")
    keys = sorted(store.keys())
    out = [MAGIC, struct.pack("<I", FORMAT_VERSION), digest, struct.pack("<QI", step, len(keys))]
    for k in keys:
        name = k.encode("utf-8")
        arr = store.params[k]
        out.append(struct.pack("<I", len(name)))
        out.append(name)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def loads(blob: bytes, source=None) -> tuple[ParamStore, CheckpointHeader]:
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ParseError("truncated checkpoint", path=source)
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise ParseError("not a checkpoint file (bad magic)", path=source)
    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", path=source)
    digest = bytes(take(32))
    step, count = struct.unpack("<QI", take(12))
    store = ParamStore()
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = bytes(take(nlen)).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        n = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
        store.add(name, data)
    if pos != len(view):
        raise ParseError("trailing bytes after checkpoint payload", path=source)
    return store, CheckpointHeader(version, digest, step)


def save_checkpoint(path, store: ParamStore, step: int = 0, digest: bytes = b"\0" * 32) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(dumps(store, step, digest))
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def load_checkpoint(path) -> tuple[ParamStore, CheckpointHeader]:
    return loads(Path(path).read_bytes(), source=str(path))
