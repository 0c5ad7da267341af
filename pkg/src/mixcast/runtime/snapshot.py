"""Binary container for named float64 tensors (checkpoints, dataset values).

File layout (all integers little-endian, no alignment padding):

    magic    8 bytes   b"MXTS0001"
    count    uint64    number of records
    records  count times:
        name_len  uint16
        name      name_len bytes, UTF-8
        rank      uint8
        dims      rank x uint64
        data      prod(dims) x float64, row-major (C order), little-endian

An empty name is conventional for single-tensor files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MXTS0001"


class SnapshotError(ValueError):
    """Malformed or truncated snapshot file."""


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_tensors(path) -> dict[str, np.ndarray]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise SnapshotError(f"{path}: bad magic (not a tensor snapshot)")
    off = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(raw):
            raise SnapshotError(f"{path}: truncated at byte {off}")
        chunk = raw[off: off + n]
        off += n
        return chunk

    (count,) = struct.unpack("<Q", take(8))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        n_items = 1
        for d in dims:
            n_items *= d
        data = np.frombuffer(take(8 * n_items), dtype="<f8").reshape(dims)
        out[name] = data.astype(np.float64)  # writable copy, native order
    if off != len(raw):
        raise SnapshotError(f"{path}: {len(raw) - off} trailing bytes")
    return out


def save_tensor(path, arr: np.ndarray, name: str = "") -> None:
    save_tensors(path, {name: arr})


def load_tensor(path, name: str = "") -> np.ndarray:
    tensors = load_tensors(path)
    if name not in tensors:
        raise SnapshotError(f"{path}: no tensor named {name!r} "
                            f"(has {sorted(tensors)})")
    return tensors[name]
