"""Reader/writer for the NCKM weights container.

Independent implementation of the shared exchange format: magic "NCKM",
u32 version, u64 header length, canonical-JSON manifest, contiguous
float32 little-endian tensor data.  Linear weights are stored input-major
(applied as y = x @ w + b).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"NCKM"
VERSION = 1


class NckmError(ValueError):
    pass


@dataclass
class NckmFile:
    kind: str
    dims: dict
    ple_edges: list[np.ndarray]
    tensors: dict[str, np.ndarray]  # float32, insertion order == file order


def save(f: NckmFile, path: str | Path) -> None:
    entries, blobs, offset = [], [], 0
    for name, t in f.tensors.items():
        arr = np.ascontiguousarray(t, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "kind": f.kind,
        "dims": f.dims,
        "ple_edges": [[float(v) for v in e] for e in f.ple_edges],
        "tensors": entries,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load(path: str | Path) -> NckmFile:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise NckmError("bad magic")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise NckmError(f"unsupported version {version}")
    (hlen,) = struct.unpack_from("<Q", data, 8)
    manifest = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    body = data[16 + hlen :]
    tensors: dict[str, np.ndarray] = {}
    for e in manifest["tensors"]:
        shape = tuple(int(s) for s in e["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(e["offset"])
        end = start + 4 * count
        if end > len(body):
            raise NckmError(f"truncated tensor {e['name']!r}")
        tensors[e["name"]] = np.frombuffer(body[start:end], dtype="<f4").reshape(shape).copy()
    return NckmFile(
        kind=manifest["kind"],
        dims=manifest["dims"],
        ple_edges=[np.asarray(e, dtype=float) for e in manifest["ple_edges"]],
        tensors=tensors,
    )
