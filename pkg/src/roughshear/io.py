"""Field files.

JSON layout::

    {"grid": {"n_points": N, "domain_length": L, "origin": y0},
     "is_real": true,
     "values": [re_0, im_0, re_1, im_1, ...]}

Binary layout (little-endian, 32-byte header then data)::

    offset  size  content
    0       4     magic b"RSF1"
    4       4     uint32 n_points
    8       8     float64 domain_length
    16      8     float64 origin
    24      1     uint8 is_real
    25      7     zero padding
    32      16*N  complex128 grid values
"""
import json
import struct
from pathlib import Path

import numpy as np

from .fields import Grid, GridField, as_grid

MAGIC = b"RSF1"
_HEADER = struct.Struct("<4sIddB7x")


def field_to_dict(f):
    f = as_grid(f)
    g = f.grid
    inter = np.empty(2 * g.n_points)
    inter[0::2] = f.values.real
    inter[1::2] = f.values.imag
    return {"grid": {"n_points": g.n_points, "domain_length": g.domain_length, "origin": g.origin},
            "is_real": bool(f.is_real), "values": inter.tolist()}


def field_from_dict(d):
    g = d["grid"]
    grid = Grid(int(g["n_points"]), float(g.get("domain_length", 2 * np.pi)),
                float(g.get("origin", -np.pi)))
    inter = np.asarray(d["values"], dtype=float)
    if inter.size != 2 * grid.n_points:
        raise ValueError(f"expected {2 * grid.n_points} interleaved values, got {inter.size}")
    return GridField(grid, inter[0::2] + 1j * inter[1::2], bool(d.get("is_real", False)))


def write_binary(f, path):
    f = as_grid(f)
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.n_points, g.domain_length, g.origin, int(f.is_real)))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_binary(path):
    raw = Path(path).read_bytes()
    magic, n, length, origin, is_real = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a field file (magic {magic!r})")
    vals = np.frombuffer(raw, dtype="<c16", count=n, offset=_HEADER.size)
    return GridField(Grid(n, length, origin), vals, bool(is_real))


def save_field(f, path):
    path = Path(path)
    if path.suffix in (".bin", ".rsf"):
        write_binary(f, path)
    else:
        path.write_text(json.dumps(field_to_dict(f)))


def load_field(path):
    path = Path(path)
    if path.suffix in (".bin", ".rsf"):
        return read_binary(path)
    return field_from_dict(json.loads(path.read_text()))
