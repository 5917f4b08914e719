"""Binary field files.

Layout (little-endian): magic ``b"SPNS"``, version u32, d u32, n per axis
(d x u32), L f64, component count u32, then ``m * n**d`` float64 samples,
row-major per component.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .spectral_core import Field, Grid

MAGIC = b"SPNS"
VERSION = 1


def encode_field(f: Field) -> bytes:
    g = f.grid
    header = MAGIC + struct.pack("<II", VERSION, g.d)
    header += struct.pack(f"<{g.d}I", *([g.n] * g.d))
    header += struct.pack("<dI", g.L, f.m)
    return header + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode_field(data: bytes) -> Field:
    if data[:4] != MAGIC:
        raise InputError("not a field file (bad magic)")
    version, d = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise InputError(f"unsupported field file version {version}")
    if d not in (1, 2, 3):
        raise InputError(f"invalid dimension {d} in field header")
    off = 12
    ns = struct.unpack_from(f"<{d}I", data, off)
    off += 4 * d
    if len(set(ns)) != 1:
        raise InputError(f"anisotropic grids are not supported: {ns}")
    L, m = struct.unpack_from("<dI", data, off)
    off += 12
    grid = Grid(d, ns[0], L)
    expected = m * grid.size * 8
    if len(data) - off != expected:
        raise InputError(
            f"payload has {len(data) - off} bytes, header implies {expected}"
        )
    vals = np.frombuffer(data, dtype="<f8", offset=off).reshape((m,) + grid.shape)
    return Field(grid, vals.astype(np.float64))


def write_field(path, f: Field) -> None:
    Path(path).write_bytes(encode_field(f))


def read_field(path) -> Field:
    return decode_field(Path(path).read_bytes())
