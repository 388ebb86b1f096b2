"""Binary checkpoint files: versioned header, JSON manifest, raw float64 data.

Layout:
    magic (8 bytes)  = b"EVSCKPT\\0"
    version (u32 LE) = 1
    manifest length (u64 LE)
    manifest (UTF-8 JSON): {"meta": {...}, "arrays": [{"name", "shape"}, ...]}
    arrays, in manifest order, little-endian float64, C order

Save/load round-trips bitwise.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"EVSCKPT\x00"
VERSION = 1


def save_checkpoint(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    for name, arr in arrays.items():
        shape = list(np.shape(arr))
        # ascontiguousarray promotes 0-d to 1-d, so record the shape first
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": shape})
        blobs.append(arr.tobytes())
    manifest = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Return (meta, arrays) from a checkpoint file."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (mlen,) = struct.unpack("<Q", fh.read(8))
        try:
            manifest = json.loads(fh.read(mlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt manifest: {exc}") from None
        arrays = {}
        for entry in manifest["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"{path}: truncated data for array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        return manifest["meta"], arrays
