"""Minimal reverse-mode differentiation runtime on float64 numpy arrays."""

from . import ops
from .gradcheck import GradCheckError, GradCheckReport, grad_check, relative_error
from .snapshot import SnapshotError, load_tensor, load_tensors, save_tensor, save_tensors
from .tensor import (
    MAX_RANK,
    DiffGraph,
    NumericError,
    Parameter,
    ParamStore,
    ShapeError,
    Tensor,
    backward,
    check_dims,
    suspend_finite_checks,
)

__all__ = [
    "ops", "Tensor", "Parameter", "ParamStore", "DiffGraph", "backward",
    "ShapeError", "NumericError", "check_dims", "suspend_finite_checks",
    "MAX_RANK", "grad_check", "GradCheckReport", "GradCheckError",
    "relative_error", "save_tensors", "load_tensors", "save_tensor",
    "load_tensor", "SnapshotError",
]
