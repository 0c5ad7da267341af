"""Tensor time-series datasets: a dense (time, location, source) block.

Two on-disk formats are supported:

* long-form CSV with header ``timestamp,location,source,value`` and exactly
  one row per (timestamp, location, source) combination;
* a binary tensor snapshot holding ``values`` plus a JSON sidecar
  (``<path>.json``) with ``time_index``, ``location_ids``, ``source_ids``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from ..runtime import load_tensors, save_tensors


class DataError(ValueError):
    """Invalid or malformed dataset input."""


def _parse_timestamp(text: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise DataError(f"{where}: bad ISO-8601 timestamp {text!r}") from None


@dataclass
class TtsDataset:
    """Dense rank-3 series with axis labels.

    ``values[t, l, s]`` is the observation at ``time_index[t]`` for
    ``location_ids[l]`` and ``source_ids[s]``. Timestamps must be strictly
    increasing and equally spaced; values must be finite.
    """

    values: np.ndarray
    time_index: list[str]
    location_ids: list[str]
    source_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise DataError(f"values must be rank 3, got shape {self.values.shape}")
        t, l, s = self.values.shape
        if len(self.time_index) != t:
            raise DataError(f"time_index length {len(self.time_index)} != {t} steps")
        if len(self.location_ids) != l or len(self.source_ids) != s:
            raise DataError("axis label counts do not match value shape")
        bad = np.argwhere(~np.isfinite(self.values))
        if bad.size:
            ti, li, si = (int(v) for v in bad[0])
            raise DataError(
                f"non-finite value at (t={self.time_index[ti]}, "
                f"l={self.location_ids[li]}, s={self.source_ids[si]})"
            )
        stamps = [_parse_timestamp(t_, f"time_index[{i}]")
                  for i, t_ in enumerate(self.time_index)]
        diffs = {(b - a).total_seconds() for a, b in zip(stamps, stamps[1:])}
        if any(d <= 0 for d in diffs):
            raise DataError("timestamps must be strictly increasing")
        if len(diffs) > 1:
            raise DataError(f"timestamps must be equally spaced, found steps {sorted(diffs)}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "TtsDataset":
        """Same axes, different values (e.g. after normalization)."""
        return TtsDataset(values, list(self.time_index),
                          list(self.location_ids), list(self.source_ids))


def load_dataset(path, format: str = "csv") -> TtsDataset:
    """Load and fully validate a dataset in the named format."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise DataError(f"unknown dataset format {format!r} (expected csv or binary)")


def _load_csv(path: Path) -> TtsDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no rows") from None
        if [h.strip() for h in header] != ["timestamp", "location", "source", "value"]:
            raise DataError(
                f"{path}: header must be timestamp,location,source,value, got {header}"
            )
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no rows")

    times: list[str] = []
    locations: list[str] = []
    sources: list[str] = []
    t_pos: dict[str, int] = {}
    l_pos: dict[str, int] = {}
    s_pos: dict[str, int] = {}
    cells: dict[tuple[int, int, int], float] = {}
    for i, row in enumerate(rows, start=2):  # header is line 1
        if len(row) != 4:
            raise DataError(f"{path}:{i}: expected 4 columns, got {len(row)}")
        ts, loc, src, raw = (c.strip() for c in row)
        for label, known, positions in ((ts, times, t_pos), (loc, locations, l_pos),
                                        (src, sources, s_pos)):
            if label not in positions:
                positions[label] = len(known)
                known.append(label)
        try:
            value = float(raw)
        except ValueError:
            raise DataError(f"{path}:{i}: bad value {raw!r}") from None
        if not math.isfinite(value):
            raise DataError(
                f"{path}:{i}: non-finite value at (t={ts}, l={loc}, s={src})"
            )
        key = (t_pos[ts], l_pos[loc], s_pos[src])
        if key in cells:
            raise DataError(f"{path}:{i}: duplicate cell (t={ts}, l={loc}, s={src})")
        cells[key] = value

    shape = (len(times), len(locations), len(sources))
    if len(cells) != shape[0] * shape[1] * shape[2]:
        for ti in range(shape[0]):
            for li in range(shape[1]):
                for si in range(shape[2]):
                    if (ti, li, si) not in cells:
                        raise DataError(
                            f"{path}: ragged rows, missing cell (t={times[ti]}, "
                            f"l={locations[li]}, s={sources[si]})"
                        )
    values = np.empty(shape)
    for (ti, li, si), v in cells.items():
        values[ti, li, si] = v
    try:
        return TtsDataset(values, times, locations, sources)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _load_binary(path: Path) -> TtsDataset:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise DataError(f"missing sidecar {sidecar} for binary dataset {path}")
    tensors = load_tensors(path)
    if "values" not in tensors:
        raise DataError(f"{path}: snapshot has no 'values' tensor")
    meta = json.loads(sidecar.read_text())
    for key in ("time_index", "location_ids", "source_ids"):
        if key not in meta:
            raise DataError(f"{sidecar}: missing key {key!r}")
    try:
        return TtsDataset(tensors["values"], meta["time_index"],
                          meta["location_ids"], meta["source_ids"])
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_dataset(dataset: TtsDataset, path, format: str = "binary") -> None:
    """Write a dataset in either supported format."""
    path = Path(path)
    if format == "binary":
        save_tensors(path, {"values": dataset.values})
        meta = {
            "time_index": dataset.time_index,
            "location_ids": dataset.location_ids,
            "source_ids": dataset.source_ids,
        }
        _sidecar_path(path).write_text(json.dumps(meta, indent=1) + "\n")
    elif format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "location", "source", "value"])
            for ti, ts in enumerate(dataset.time_index):
                for li, loc in enumerate(dataset.location_ids):
                    for si, src in enumerate(dataset.source_ids):
                        writer.writerow([ts, loc, src,
                                         repr(dataset.values[ti, li, si])])
    else:
        raise DataError(f"unknown dataset format {format!r}")
