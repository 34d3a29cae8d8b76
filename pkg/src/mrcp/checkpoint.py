"""MRCPCKPT parameter checkpoints.

Layout (little-endian): ``b"MRCPCKPT"``, u32 version, then one record per
tensor -- u32 name length, name bytes, u32 rank, u32 dims, f64 payload --
and finally a u32 CRC32 of all preceding bytes.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .autodiff import ParamStore

MAGIC = b"MRCPCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(arrays: dict) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)) + nb)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(path, params) -> None:
    arrays = params.snapshot() if isinstance(params, ParamStore) else params
    Path(path).write_bytes(checkpoint_bytes(arrays))


def load_checkpoint(path) -> dict:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not an MRCPCKPT file")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: CRC mismatch")
    out = {}
    pos = 12
    try:
        while pos < len(body):
            (nlen,) = struct.unpack_from("<I", body, pos)
            pos += 4
            name = body[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", body, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 8 * count > len(body):
                raise CheckpointError(f"{path}: record {name!r} runs past end of file")
            out[name] = np.frombuffer(body, "<f8", count, pos).reshape(dims).astype(np.float64)
            pos += 8 * count
    except struct.error as exc:
        raise CheckpointError(f"{path}: malformed record") from exc
    return out
