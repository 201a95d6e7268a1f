"""Deterministic binary checkpoint container.

Layout: magic, a length-prefixed JSON manifest (sorted keys) describing
metadata plus every tensor's dtype/shape/offset, then the raw little-endian
array payloads.  No timestamps or other run-varying bytes, so identical
states serialize to identical files; float64 values round-trip exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"SETEMB01"


class CheckpointError(ValueError):
    pass


def save_tensors(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    entries = {}
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype not in (np.float64, np.int64):
            arr = arr.astype(np.float64)
        blob = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        entries[name] = {"dtype": str(arr.dtype), "shape": list(arr.shape),
                         "offset": offset, "nbytes": len(blob)}
        blobs.append(blob)
        offset += len(blob)
    manifest = json.dumps({"meta": meta, "tensors": entries},
                          sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (mlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        payload = fh.read()
    tensors = {}
    for name, entry in manifest["tensors"].items():
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]).newbyteorder("<"))
        tensors[name] = arr.reshape(entry["shape"]).astype(entry["dtype"])
    return tensors, manifest["meta"]
