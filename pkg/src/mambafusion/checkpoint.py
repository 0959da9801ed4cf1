"""Versioned binary checkpoint container.

Layout: 8-byte magic, uint32 version, uint64 header length, JSON header,
then the raw data section. The header lists each tensor's name, shape and
byte offset, carries a sha256 of the data section, and may embed arbitrary
metadata (the model config, for self-describing checkpoints). Tensor data
is float64 little-endian, row major.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MFUSCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None):
    """Write named float64 tensors plus optional metadata."""
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = arr.tobytes(order="C")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    data = b"".join(blobs)
    header = {
        "tensors": entries,
        "sha256": hashlib.sha256(data).hexdigest(),
        "meta": meta or {},
    }
    hraw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(hraw)))
        fh.write(hraw)
        fh.write(data)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint back; verifies magic, version and data checksum."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[20 : 20 + hlen])
    data = raw[20 + hlen :]
    if hashlib.sha256(data).hexdigest() != header["sha256"]:
        raise CheckpointError(f"{path}: checksum mismatch, file corrupted")
    tensors = {}
    for ent in header["tensors"]:
        shape = tuple(ent["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = ent["offset"]
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=start)
        tensors[ent["name"]] = arr.reshape(shape).copy()
    return tensors, header.get("meta", {})


def save_model(path, model, extra_meta: dict | None = None):
    meta = {"config": model.config.to_dict()}
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, {n: p.data for n, p in model.named_parameters()}, meta)


def load_model(path):
    """Rebuild a model from a self-describing checkpoint."""
    from .model import ModelConfig, build_model

    tensors, meta = load_checkpoint(path)
    if "config" not in meta:
        raise CheckpointError(f"{path}: checkpoint has no embedded model config")
    model = build_model(ModelConfig.from_dict(meta["config"]))
    load_into(model, tensors)
    return model


def load_into(model, tensors: dict[str, np.ndarray]):
    """Copy named tensors into an existing model (names/shapes must match)."""
    params = dict(model.named_parameters())
    missing = set(params) - set(tensors)
    unexpected = set(tensors) - set(params)
    if missing or unexpected:
        raise CheckpointError(
            f"parameter name mismatch: missing={sorted(missing)[:4]} unexpected={sorted(unexpected)[:4]}"
        )
    for name, p in params.items():
        arr = tensors[name]
        if arr.shape != p.data.shape:
            raise CheckpointError(f"shape mismatch for {name}: {arr.shape} vs {p.data.shape}")
        p.data[...] = arr
