"""Chronological splits and stride-1 forecasting windows.

Windows are fully contained in their split: both the input block and the
target block, so no sample ever straddles a split boundary and the test
split can never leak into training data.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dataset import DataError, TtsDataset

PARTS = ("train", "val", "test")


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous train/val/test step counts, in chronological order."""

    train: int
    val: int
    test: int

    def __post_init__(self):
        for name in PARTS:
            if getattr(self, name) < 0:
                raise DataError(f"split count {name} must be >= 0")
        if self.train < 1:
            raise DataError("training split must be nonempty")

    @property
    def total(self) -> int:
        return self.train + self.val + self.test

    def check(self, n_steps: int) -> None:
        if self.total > n_steps:
            raise DataError(
                f"split counts sum to {self.total} but dataset has {n_steps} steps"
            )

    def bounds(self, part: str) -> tuple[int, int]:
        if part == "train":
            return 0, self.train
        if part == "val":
            return self.train, self.train + self.val
        if part == "test":
            return self.train + self.val, self.total
        raise DataError(f"unknown split part {part!r}")


@dataclass
class WindowedSample:
    """One forecasting sample: input block, target block, absolute offset."""

    x: np.ndarray  # (input_len, L, S)
    y: np.ndarray  # (horizon, L, S)
    t0: int        # absolute index of the first input step


def window(dataset: TtsDataset, split: SplitSpec, part: str,
           input_len: int = 16, horizon: int = 1) -> list[WindowedSample]:
    """Stride-1 windows of one split; count = split_len - input_len - horizon + 1."""
    if input_len < 1 or horizon < 1:
        raise DataError("input_len and horizon must be >= 1")
    split.check(dataset.n_steps)
    start, stop = split.bounds(part)
    split_len = stop - start
    need = input_len + horizon
    if split_len < need:
        raise DataError(
            f"{part} split has {split_len} steps; windowing needs at least {need}"
        )
    values = dataset.values
    samples = []
    for t0 in range(start, stop - need + 1):
        samples.append(WindowedSample(
            x=values[t0: t0 + input_len],
            y=values[t0 + input_len: t0 + need],
            t0=t0,
        ))
    return samples


def stack_windows(samples: list[WindowedSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Materialize a window list as (X, Y, t0) arrays for batched use."""
    if not samples:
        raise DataError("no windows to stack")
    x = np.stack([s.x for s in samples])
    y = np.stack([s.y for s in samples])
    t0 = np.array([s.t0 for s in samples], dtype=np.int64)
    return x, y, t0


def split_fingerprint(dataset: TtsDataset, split: SplitSpec) -> str:
    """Hash of split bounds plus the exact bytes of each part.

    Lets orchestration code assert that two runs saw bit-identical splits.
    """
    h = hashlib.sha256()
    for part in PARTS:
        start, stop = split.bounds(part)
        h.update(f"{part}:{start}:{stop};".encode())
        h.update(np.ascontiguousarray(dataset.values[start:stop]).tobytes())
    return h.hexdigest()
