"""Binary checkpoint format for parameter sets.

Layout (all little-endian): magic "RACW", u32 version=1, u32 param count,
then per parameter: u16 name length, UTF-8 name, u8 rank, u32 per dim,
raw float64 data. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .params import ParamSet

MAGIC = b"RACW"
VERSION = 1


def save_params(params: ParamSet, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(params.values)))
        for name in params.names():
            arr = params.values[name]
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path) -> ParamSet:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path}: not a RACW checkpoint")
        version, count = struct.unpack("<II", f.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported RACW version {version}")
        params = ParamSet()
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<B", f.read(1))
            dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
            n = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64)
            params.add(name, data.reshape(dims))
        trailing = f.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return params
