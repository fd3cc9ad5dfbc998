"""VF3D binary field snapshots.

Layout (little-endian): magic ``b"VF3D"``, version ``u32 = 1``, ``n u32``,
``components u32``, ``time f64``, then ``components * n**3`` binary64 values in
row-major order with the third spatial axis fastest.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import FieldError, GridSpec, PeriodicVectorField

MAGIC = b"VF3D"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")


class SnapshotError(FieldError):
    pass


def write_field(f: PeriodicVectorField, path) -> None:
    header = _HEADER.pack(MAGIC, VERSION, f.grid.n, f.components, float(f.time))
    body = np.ascontiguousarray(f.data, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_field(path) -> PeriodicVectorField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, comps, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    if comps not in (1, 3):
        raise SnapshotError(f"{path}: unsupported component count {comps}")
    expected = comps * n**3 * 8
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise SnapshotError(f"{path}: expected {expected} data bytes for n={n}, components={comps}, got {len(body)}")
    try:
        grid = GridSpec(n)
    except FieldError as exc:
        raise SnapshotError(f"{path}: {exc}") from None
    data = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(comps, n, n, n)
    return PeriodicVectorField(grid, data, time)
