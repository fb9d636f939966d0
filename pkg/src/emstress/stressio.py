"""EMSTRESS v1: versioned binary container for stress field snapshots.

Layout (little-endian):
    magic   b"EMSTRESS v1\\n"
    header  <u32 design_id> <u32 n_times> <u32 n_branches> <u32 n_junctions> <f8 dx_um>
    times   f8[n_times]                 (seconds; inf encodes steady state)
    branch_ids   u32[n_branches]
    cell_counts  u32[n_branches]
    junction_nodes u32[n_junctions]
    payload per time: f8 cell values per branch (in branch order),
                      then f8[n_junctions] junction values

Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .solver import StressField

MAGIC = b"EMSTRESS v1\n"
_HEADER = struct.Struct("<IIIId")


class StressFormatError(ValueError):
    pass


def dumps(field: StressField) -> bytes:
    out = [MAGIC,
           _HEADER.pack(field.design_id, len(field.times),
                        len(field.branch_ids), len(field.junction_nodes),
                        field.dx),
           np.asarray(field.times, "<f8").tobytes(),
           np.asarray(field.branch_ids, "<u4").tobytes(),
           np.asarray([len(v) for v in field.branch_values[0]] if field.times
                      else [], "<u4").tobytes(),
           np.asarray(field.junction_nodes, "<u4").tobytes()]
    for ti in range(len(field.times)):
        for arr in field.branch_values[ti]:
            out.append(np.asarray(arr, "<f8").tobytes())
        out.append(np.asarray(field.junction_values[ti], "<f8").tobytes())
    return b"".join(out)


def loads(data: bytes) -> StressField:
    if not data.startswith(b"EMSTRESS"):
        raise StressFormatError("not an EMSTRESS file")
    if not data.startswith(MAGIC):
        raise StressFormatError("unsupported EMSTRESS version")
    off = len(MAGIC)
    design_id, n_times, n_branches, n_junctions, dx = _HEADER.unpack_from(data, off)
    off += _HEADER.size

    def take(dtype, count):
        nonlocal off
        try:
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        except ValueError as exc:
            raise StressFormatError(f"truncated file: {exc}") from exc
        off += arr.nbytes
        return arr

    times = take("<f8", n_times)
    branch_ids = take("<u4", n_branches)
    counts = take("<u4", n_branches)
    junction_nodes = take("<u4", n_junctions)
    branch_values, junction_values = [], []
    for _ in range(n_times):
        branch_values.append([take("<f8", int(c)).astype(float) for c in counts])
        junction_values.append(take("<f8", n_junctions).astype(float))
    if off != len(data):
        raise StressFormatError("trailing or truncated data")
    return StressField(design_id=int(design_id), times=[float(t) for t in times],
                       branch_ids=[int(b) for b in branch_ids],
                       branch_values=branch_values,
                       junction_nodes=[int(j) for j in junction_nodes],
                       junction_values=junction_values, dx=float(dx))


def save_stress(field: StressField, path) -> None:
    with open(path, "wb") as f:
        f.write(dumps(field))


def load_stress(path) -> StressField:
    with open(path, "rb") as f:
        return loads(f.read())
