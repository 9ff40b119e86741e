"""Flat parameter checkpoints.

Container layout (all integers little-endian)::

    b"SEMSPA-CKPT\\x01"          12-byte magic
    u64 header_length
    header                        UTF-8 JSON: {"meta": {...},
                                  "tensors": [{"name", "shape", "offset"}, ...]}
    payload                       concatenated row-major float64 arrays

Tensors are written in sorted-name order and the JSON is emitted with
sorted keys, so identical state produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SEMSPA-CKPT\x01"


def save_checkpoint(path, state: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries, chunks, offset = [], [], 0
    for name in sorted(state):
        arr = np.array(state[name], dtype="<f8", order="C")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        raw = arr.tobytes()
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in chunks:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if not blob.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    header = json.loads(blob[pos : pos + hlen].decode())
    base = pos + hlen
    state = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = base + entry["offset"]
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=start)
        state[entry["name"]] = arr.reshape(tuple(entry["shape"])).astype(np.float64)
    return state, header["meta"]
