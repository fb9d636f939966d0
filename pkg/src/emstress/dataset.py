"""EMDS v1: binary training-dataset container and design-level splits.

Layout (little-endian):
    magic    b"EMDS v1\\n"
    header   <u64 n_samples> <6 x f8 stats: mean/std current, stress, time>
    index    per sample: <u32 design_id> <f8 time_years> <u64 record offset>
    records  per sample:
        <u32 design_id> <f8 time_years>
        <u32 n_runs> u32[n_runs]      footprint mask, row-major run lengths
                                      alternating off/on, starting with off
        f4[256*256] current image     (raw physical values)
        f4[256*256] stress image
    trailer  sha256 digest of everything before it (32 bytes)

Images are stored raw (A/m^2 and Pa); normalization statistics travel in
the header so values can be standardized and exactly inverted downstream.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .model import CANVAS_UM
from .raster import NormStats

MAGIC = b"EMDS v1\n"
_IMG_BYTES = CANVAS_UM * CANVAS_UM * 4


class DatasetFormatError(ValueError):
    pass


@dataclass
class SamplePair:
    design_id: int
    time_years: float
    current: np.ndarray   # float32 (256,256)
    stress: np.ndarray    # float32 (256,256)
    mask: np.ndarray      # bool (256,256), shared footprint

    def validate(self) -> None:
        if self.current.shape != (CANVAS_UM, CANVAS_UM) or \
           self.stress.shape != (CANVAS_UM, CANVAS_UM):
            raise ValueError("images must be 256x256")
        if np.any(self.current[~self.mask] != 0) or np.any(self.stress[~self.mask] != 0):
            raise ValueError("nonzero pixels outside footprint mask")


def mask_to_runs(mask: np.ndarray) -> np.ndarray:
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return np.zeros(0, dtype="<u4")
    change = np.flatnonzero(np.diff(flat.astype(np.int8)))
    bounds = np.concatenate([[-1], change, [flat.size - 1]])
    runs = np.diff(bounds).astype("<u4")
    if flat[0]:  # runs must start with an 'off' run
        runs = np.concatenate([np.zeros(1, dtype="<u4"), runs])
    return runs


def runs_to_mask(runs: np.ndarray, size: int) -> np.ndarray:
    flat = np.zeros(size, dtype=bool)
    pos, on = 0, False
    for r in np.asarray(runs, dtype=np.int64):
        if on:
            flat[pos:pos + r] = True
        pos += int(r)
        on = not on
    if pos != size:
        raise DatasetFormatError("mask run lengths do not cover the image")
    return flat


def write_dataset(samples: list[SamplePair], stats: NormStats, path) -> None:
    samples = sorted(samples, key=lambda s: (s.design_id, s.time_years))
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<Q", len(samples))
    blob += struct.pack("<6d", stats.mean_current, stats.std_current,
                        stats.mean_stress, stats.std_stress,
                        stats.mean_time, stats.std_time)
    index_off = len(blob)
    blob += b"\0" * (20 * len(samples))  # patched below
    offsets = []
    for s in samples:
        s.validate()
        offsets.append(len(blob))
        blob += struct.pack("<Id", s.design_id, s.time_years)
        runs = mask_to_runs(s.mask)
        blob += struct.pack("<I", len(runs))
        blob += runs.tobytes()
        blob += np.ascontiguousarray(s.current, dtype="<f4").tobytes()
        blob += np.ascontiguousarray(s.stress, dtype="<f4").tobytes()
    for i, (s, off) in enumerate(zip(samples, offsets)):
        struct.pack_into("<IdQ", blob, index_off + 20 * i,
                         s.design_id, s.time_years, off)
    blob += hashlib.sha256(bytes(blob)).digest()
    with open(path, "wb") as f:
        f.write(bytes(blob))


@dataclass
class Dataset:
    stats: NormStats
    samples: list[SamplePair]
    sha256: str

    def lookup(self, design_id: int, time_years: float) -> SamplePair:
        for s in self.samples:
            if s.design_id == design_id and s.time_years == time_years:
                return s
        raise KeyError((design_id, time_years))

    @property
    def design_ids(self) -> list[int]:
        return sorted({s.design_id for s in self.samples})


def read_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"EMDS"):
        raise DatasetFormatError("not an EMDS file")
    if not data.startswith(MAGIC):
        raise DatasetFormatError("unsupported EMDS version")
    if len(data) < 32:
        raise DatasetFormatError("truncated file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise DatasetFormatError("checksum mismatch (corrupt or truncated file)")
    off = len(MAGIC)
    (n_samples,) = struct.unpack_from("<Q", body, off)
    off += 8
    stats = NormStats(*struct.unpack_from("<6d", body, off))
    off += 48
    index = []
    for _ in range(n_samples):
        index.append(struct.unpack_from("<IdQ", body, off))
        off += 20
    samples = []
    for design_id, time_years, rec_off in index:
        s = _decode_record(body, rec_off)
        if s.design_id != design_id or s.time_years != time_years:
            raise DatasetFormatError("index entry does not match record")
        samples.append(s)
    return Dataset(stats=stats, samples=samples,
                   sha256=hashlib.sha256(data).hexdigest())


def _decode_record(body: bytes, rec_off: int) -> SamplePair:
    o = rec_off
    did, ty = struct.unpack_from("<Id", body, o)
    o += 12
    (n_runs,) = struct.unpack_from("<I", body, o)
    o += 4
    runs = np.frombuffer(body, dtype="<u4", count=n_runs, offset=o)
    o += 4 * n_runs
    mask = runs_to_mask(runs, CANVAS_UM * CANVAS_UM).reshape(CANVAS_UM, CANVAS_UM)
    cur = np.frombuffer(body, dtype="<f4", count=CANVAS_UM * CANVAS_UM,
                        offset=o).reshape(CANVAS_UM, CANVAS_UM).copy()
    o += _IMG_BYTES
    st = np.frombuffer(body, dtype="<f4", count=CANVAS_UM * CANVAS_UM,
                       offset=o).reshape(CANVAS_UM, CANVAS_UM).copy()
    return SamplePair(design_id=did, time_years=ty, current=cur, stress=st,
                      mask=mask)


def read_index(path) -> tuple[NormStats, list[tuple[int, float, int]]]:
    """Header stats and (design_id, time_years, offset) index entries."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(MAGIC):
        raise DatasetFormatError("not an EMDS v1 file")
    off = len(MAGIC)
    (n_samples,) = struct.unpack_from("<Q", data, off)
    off += 8
    stats = NormStats(*struct.unpack_from("<6d", data, off))
    off += 48
    index = []
    for _ in range(n_samples):
        did, ty, rec = struct.unpack_from("<IdQ", data, off)
        index.append((int(did), float(ty), int(rec)))
        off += 20
    return stats, index


def read_sample(path, design_id: int, time_years: float) -> SamplePair:
    """Random access through the index table, without decoding every record."""
    with open(path, "rb") as f:
        data = f.read()
    _, index = read_index(path)
    for did, ty, rec in index:
        if did == design_id and ty == time_years:
            return _decode_record(data, rec)
    raise KeyError((design_id, time_years))


def split_by_design(design_ids, test_fraction: float = 0.15,
                    seed: int = 0) -> tuple[list[int], list[int]]:
    """Deterministic design-level split: all time samples of a design land
    on one side."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0,1)")
    import random
    ids = sorted(set(design_ids))
    rng = random.Random(seed)
    rng.shuffle(ids)
    n_test = int(round(test_fraction * len(ids)))
    n_test = min(max(n_test, 1), len(ids) - 1)
    test = sorted(ids[:n_test])
    train = sorted(ids[n_test:])
    return train, test
