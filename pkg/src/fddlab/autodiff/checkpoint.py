"""Binary container for named float64 tensors (parameter checkpoints).

Layout, all little-endian:

    magic  4 bytes  b"FDDW"
    u16    format version (currently 1)
    u32    number of named tensors
    per tensor:
        u16    name length in bytes
        bytes  UTF-8 name
        u8     rank
        u32[]  dims
        f64[]  values, C order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FDDW"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint container."""


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for name, arr in tensors.items():
        # asarray, not ascontiguousarray: the latter promotes rank 0 to rank 1
        arr = np.asarray(arr, dtype=np.float64)
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    off = 4
    try:
        version, count = struct.unpack_from("<HI", blob, off)
        off += 6
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", blob, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            end = off + 8 * n
            if end > len(blob):
                raise CheckpointError(f"{path}: truncated tensor payload for {name!r}")
            values = np.frombuffer(blob[off:end], dtype="<f8").astype(np.float64)
            off = end
            out[name] = values.reshape(dims)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header ({exc})") from exc
    return out
