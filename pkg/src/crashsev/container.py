"""Versioned binary container: magic, JSON header, little-endian arrays."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_PREFIX = struct.Struct("<8sII")


def write_container(path, magic: bytes, version: int, header: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    """Write ``header`` plus named arrays.

    Array layout (dtype, shape, byte offset) is appended to the header under
    ``"arrays"``; payloads follow the header, each stored little-endian.
    """
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    layout = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = le.tobytes()
        layout.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape),
                       "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    head = json.dumps({**header, "arrays": layout}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(magic, version, len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def read_container(path, magic: bytes, versions=(1,)) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise ValueError(f"{path}: truncated container")
    got, version, head_len = _PREFIX.unpack_from(data)
    if got != magic:
        raise ValueError(f"{path}: bad magic {got!r}")
    if version not in versions:
        raise ValueError(f"{path}: unsupported version {version}")
    start = _PREFIX.size
    header = json.loads(data[start:start + head_len])
    base = start + head_len
    arrays = {}
    for entry in header.pop("arrays"):
        lo = base + entry["offset"]
        buf = data[lo:lo + entry["nbytes"]]
        if len(buf) != entry["nbytes"]:
            raise ValueError(f"{path}: truncated array {entry['name']}")
        arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(arr.dtype.newbyteorder("="))
    return header, arrays
