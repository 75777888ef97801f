"""Flat binary field container with a JSON header.

Layout: magic b"GPLF", a little-endian uint32 header length, the UTF-8 JSON
header (geometry, shape, dtype), then the raw C-order little-endian payload.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import InvalidParameterError
from .grids import CartesianGrid, Field, RadialGrid

MAGIC = b"GPLF"


def write_field(path, field: Field) -> None:
    data = np.ascontiguousarray(field.data)
    if field.is_radial:
        geom = {"type": "radial", "r_max": field.grid.r_max, "n": field.grid.n}
    else:
        geom = {"type": "cartesian", "L": field.grid.L, "n": field.grid.n}
    header = {
        "geometry": geom,
        "shape": list(data.shape),
        "dtype": data.dtype.str,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(data.astype(data.dtype.newbyteorder("<")).tobytes(order="C"))


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise InvalidParameterError(f"{path} is not a field container")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        raw = fh.read()
    dtype = np.dtype(header["dtype"])
    data = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(header["shape"])
    geom = header["geometry"]
    if geom["type"] == "radial":
        grid = RadialGrid(float(geom["r_max"]), int(geom["n"]))
    else:
        grid = CartesianGrid(float(geom["L"]), int(geom["n"]))
    return Field(grid, data.copy())
