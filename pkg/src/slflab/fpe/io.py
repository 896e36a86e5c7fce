"""Snapshot output: CSV rows and a raw binary dump with a fixed 64-byte header.

Binary layout (little endian):

    offset  size  field
    0       4     magic b"FPE1"
    4       4     uint32 d
    8       32    uint32 dims[8] (unused entries 0)
    40      8     float64 h
    48      8     float64 t
    56      8     float64 L
    64      ...   float64 values in C order
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from slflab.fpe.solver import GridFunction
from slflab.grid import GridSpec

MAGIC = b"FPE1"
HEADER = struct.Struct("<4sI8Iddd")
assert HEADER.size == 64
MAX_DIMS = 8


def write_binary(path, g: GridFunction) -> None:
    dims = list(g.grid.shape) + [0] * (MAX_DIMS - g.grid.d)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, g.grid.d, *dims, g.grid.h, g.time, g.grid.L))
        fh.write(np.ascontiguousarray(g.values, dtype="<f8").tobytes())


def read_binary(path) -> GridFunction:
    raw = Path(path).read_bytes()
    magic, d, *rest = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    dims = tuple(rest[:d])
    h, t, L = rest[MAX_DIMS:]
    vals = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(dims)
    return GridFunction(GridSpec(d, L, h), vals.copy(), t)


def write_csv(path, g: GridFunction) -> None:
    d = g.grid.d
    idx = np.indices(g.grid.shape).reshape(d, -1).T
    pts = g.grid.cell_centers()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{k}" for k in range(d)] + [f"x{k}" for k in range(d)] + ["value"])
        for i, x, v in zip(idx, pts, g.values.ravel()):
            w.writerow([*i.tolist(), *(repr(float(c)) for c in x), repr(float(v))])
