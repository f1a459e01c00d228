"""Binary checkpoint format.

    header : 8-byte magic b"GTNCKPT\\0", uint32 format version, uint32 record count
    record : uint32 name length, UTF-8 name, uint32 rank, rank x uint32 dims,
             prod(dims) little-endian float64 values

All integers are little-endian. Optimizer moments are stored as ordinary
records under ``adam.m/<param>`` and ``adam.v/<param>``; scalar training
state (Adam step, epoch, learning rate) as rank-0 records under ``meta/``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"GTNCKPT\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_records(records: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(records))]
    for name, value in records.items():
        arr = np.asarray(value, dtype="<f8")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw_name)) + raw_name)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode_records(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    if len(blob) < 16:
        raise CheckpointError("truncated header")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 16
    records: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            if pos + 8 * size > len(blob):
                raise CheckpointError(f"truncated record {name!r} at byte {pos}")
            records[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(dims).astype(np.float64)
            pos += 8 * size
    except struct.error as err:
        raise CheckpointError(f"truncated checkpoint at byte {pos}: {err}") from None
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after last record")
    return records


def save_checkpoint(path, model, adam=None, epoch: int = 0) -> None:
    records = {name: p.data for name, p in model.named_parameters()}
    records["meta/epoch"] = np.array(float(epoch))
    if adam is not None:
        records["meta/adam_step"] = np.array(float(adam.step))
        records["meta/lr"] = np.array(adam.lr)
        for name, m in adam.m.items():
            records[f"adam.m/{name}"] = m
        for name, v in adam.v.items():
            records[f"adam.v/{name}"] = v
    Path(path).write_bytes(encode_records(records))


def load_checkpoint(path, model, adam=None) -> int:
    """Restore parameters (and optimizer state if ``adam`` given); returns the stored epoch."""
    records = decode_records(Path(path).read_bytes())
    params = dict(model.named_parameters())
    missing = [n for n in params if n not in records]
    if missing:
        raise CheckpointError(f"checkpoint lacks parameter {missing[0]!r} (profile mismatch?)")
    for name, p in params.items():
        if records[name].shape != p.shape:
            raise CheckpointError(
                f"parameter {name!r}: checkpoint shape {records[name].shape} vs model {p.shape}")
    for name, p in params.items():
        p.data = records[name].copy()
    if adam is not None:
        adam.step = int(records.get("meta/adam_step", np.array(0.0)))
        if "meta/lr" in records:
            adam.lr = float(records["meta/lr"])
        adam.m = {k.split("/", 1)[1]: v.copy() for k, v in records.items() if k.startswith("adam.m/")}
        adam.v = {k.split("/", 1)[1]: v.copy() for k, v in records.items() if k.startswith("adam.v/")}
    return int(records.get("meta/epoch", np.array(0.0)))
