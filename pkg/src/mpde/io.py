"""Binary field snapshots and their JSON sidecars.

Layout (little endian)::

    magic            4 bytes  b"MPDE"
    version          uint32
    n                uint32
    N                uint32
    L                float64
    representation   uint32   0 = physical, 1 = fourier
    values           N**n complex, interleaved float64 (re, im), C order

The sidecar ``<file>.json`` carries provenance (model, time, parameters).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import FOURIER, PHYSICAL, Field, Grid

MAGIC = b"MPDE"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdI")
_REPR_CODE = {PHYSICAL: 0, FOURIER: 1}
_CODE_REPR = {v: k for k, v in _REPR_CODE.items()}


class SnapshotFormatError(ValueError):
    pass


def encode_field(f: Field) -> bytes:
    g = f.grid
    head = _HEADER.pack(MAGIC, VERSION, g.n, g.N, g.L, _REPR_CODE[f.representation])
    body = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    return head + body


def decode_field(buf: bytes) -> Field:
    if len(buf) < _HEADER.size:
        raise SnapshotFormatError("truncated header")
    magic, version, n, N, L, rep = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported format version {version}")
    if rep not in _CODE_REPR:
        raise SnapshotFormatError(f"bad representation flag {rep}")
    grid = Grid(n, N, L)
    count = N ** n
    body = buf[_HEADER.size:]
    if len(body) != 16 * count:
        raise SnapshotFormatError(f"expected {16 * count} payload bytes, got {len(body)}")
    vals = np.frombuffer(body, dtype="<c16").reshape(grid.shape)
    return Field(grid, vals, _CODE_REPR[rep])


def write_field(path, f: Field, meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_bytes(encode_field(f))
    if meta is not None:
        sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def read_field(path) -> Field:
    return decode_field(Path(path).read_bytes())


def read_meta(path) -> dict:
    return json.loads(sidecar(Path(path)).read_text())


def sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
