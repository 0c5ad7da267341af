"""Dataset loading, normalization, windowing, and synthetic generation."""

from .dataset import DataError, TtsDataset, load_dataset, save_dataset
from .normalize import NormStats, zscore
from .synthetic import SynthSpec, generate_synthetic
from .windows import (
    SplitSpec,
    WindowedSample,
    split_fingerprint,
    stack_windows,
    window,
)

__all__ = [
    "DataError", "TtsDataset", "load_dataset", "save_dataset",
    "NormStats", "zscore", "SynthSpec", "generate_synthetic",
    "SplitSpec", "WindowedSample", "window", "stack_windows",
    "split_fingerprint",
]
