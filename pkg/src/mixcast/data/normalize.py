"""Z-score normalization with train-split statistics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import DataError, TtsDataset


@dataclass
class NormStats:
    """Mean/std used for normalization; computed from the training split only.

    ``mode`` "global" keeps one scalar pair over the whole T x L x S block;
    "per_source" keeps one pair per source (population formula either way).
    """

    mean: np.ndarray
    std: np.ndarray
    mode: str = "global"

    def to_json(self) -> dict:
        return {"mode": self.mode,
                "mean": np.asarray(self.mean).tolist(),
                "std": np.asarray(self.std).tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        return cls(np.asarray(obj["mean"], dtype=np.float64),
                   np.asarray(obj["std"], dtype=np.float64),
                   obj.get("mode", "global"))

    def _broadcast(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.mode == "global":
            return self.mean, self.std
        # per_source: stats indexed by the trailing source axis
        shape = (1,) * (arr.ndim - 1) + (-1,)
        return self.mean.reshape(shape), self.std.reshape(shape)

    def apply(self, arr: np.ndarray) -> np.ndarray:
        mean, std = self._broadcast(np.asarray(arr))
        return (arr - mean) / std

    def invert(self, arr: np.ndarray) -> np.ndarray:
        mean, std = self._broadcast(np.asarray(arr))
        return arr * std + mean


def _guard_std(std: np.ndarray) -> np.ndarray:
    std = np.asarray(std, dtype=np.float64)
    if np.any(std == 0):
        warnings.warn("constant series in training split; substituting std=1",
                      stacklevel=3)
        std = np.where(std == 0, 1.0, std)
    return std


def zscore(dataset: TtsDataset, train_len: int,
           mode: str = "global") -> tuple[TtsDataset, NormStats]:
    """Normalize a dataset using statistics of its first ``train_len`` steps.

    Returns the normalized dataset and the stats needed to invert the
    transform exactly (round trip within 1e-12).
    """
    if train_len < 1:
        raise DataError("training split is empty; cannot compute z-score stats")
    if train_len > dataset.n_steps:
        raise DataError(f"train_len {train_len} exceeds dataset length {dataset.n_steps}")
    if mode not in ("global", "per_source"):
        raise DataError(f"unknown normalization mode {mode!r}")
    train = dataset.values[:train_len]
    if mode == "global":
        stats = NormStats(np.asarray(np.mean(train)),
                          _guard_std(np.asarray(np.std(train))), mode)
    else:
        stats = NormStats(np.mean(train, axis=(0, 1)),
                          _guard_std(np.std(train, axis=(0, 1))), mode)
    return dataset.with_values(stats.apply(dataset.values)), stats
