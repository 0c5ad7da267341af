"""Differentiable tensor values on float64 numpy arrays.

A ``Tensor`` is one node in a computation graph: it owns its forward value
plus the links (parents, vector-Jacobian products) needed for reverse-mode
differentiation. Leaves are ``Parameter`` objects or constants; everything
else is produced by the primitives in :mod:`mixcast.runtime.ops`.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_RANK = 5


class ShapeError(ValueError):
    """Operand shapes do not conform for an operation."""

    def __init__(self, op: str, detail: str, *shapes: tuple):
        self.op = op
        self.shapes = shapes
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        msg = f"{op}: {detail}" + (f" (shapes: {shown})" if shapes else "")
        super().__init__(msg)


class NumericError(FloatingPointError):
    """A public operation produced NaN or Inf."""


_FINITE_CHECKS = True


@contextmanager
def suspend_finite_checks():
    """Allow non-finite intermediates inside a block.

    Used where -inf is meaningful data (log joint densities before the
    documented underflow fallback). The block is responsible for producing
    finite outputs again.
    """
    global _FINITE_CHECKS
    prev = _FINITE_CHECKS
    _FINITE_CHECKS = False
    try:
        yield
    finally:
        _FINITE_CHECKS = prev


def check_dims(dims: Sequence[int], op: str = "tensor") -> tuple[int, ...]:
    """Validate a shape: rank <= MAX_RANK, every extent >= 1."""
    dims = tuple(int(d) for d in dims)
    if len(dims) > MAX_RANK:
        raise ShapeError(op, f"rank {len(dims)} exceeds maximum {MAX_RANK}", dims)
    if any(d < 1 for d in dims):
        raise ShapeError(op, "every extent must be >= 1", dims)
    return dims


def _assert_finite(data: np.ndarray, op: str) -> None:
    if not _FINITE_CHECKS:
        return
    # Fast path: a single reduction; NaN/Inf poison the sum.
    s = float(np.sum(data))
    if math.isfinite(s):
        return
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))
        first = tuple(int(i) for i in bad[0])
        raise NumericError(
            f"{op}: produced {bad.shape[0]} non-finite value(s), first at index {first}"
        )


def _coerce(data, op: str = "tensor") -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    check_dims(arr.shape, op)
    return arr


class Tensor:
    """A float64 array plus reverse-mode bookkeeping.

    ``parents`` and ``vjps`` are parallel tuples: ``vjps[i]`` maps the
    gradient at this node to the gradient contribution of ``parents[i]``.
    Constants and parameters have no parents.
    """

    __slots__ = ("data", "parents", "vjps", "op")

    def __init__(
        self,
        data,
        parents: tuple["Tensor", ...] = (),
        vjps: tuple[Callable[[np.ndarray], np.ndarray], ...] = (),
        op: str = "const",
    ):
        if isinstance(data, np.ndarray):
            check_dims(data.shape, op)
            self.data = data
        else:
            self.data = _coerce(data, op)
        self.parents = parents
        self.vjps = vjps
        self.op = op
        _assert_finite(self.data, op)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape})"

    # Operator sugar; implementations live in ops.py (bound at import).
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops

        return ops.div(other, self)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        from . import ops

        return ops.reshape(self, shape)

    def transpose(self, axes):
        from . import ops

        return ops.transpose(self, axes)


class Parameter(Tensor):
    """A trainable leaf with a stable id and a persistent gradient buffer."""

    __slots__ = ("pid", "grad", "init_spec")

    def __init__(self, pid: str, data, init_spec: str = "explicit"):
        super().__init__(_coerce(data, f"parameter {pid}"), op=f"param:{pid}")
        self.pid = pid
        self.grad = np.zeros_like(self.data)
        self.init_spec = init_spec

    def assign(self, data) -> None:
        """Overwrite the value in place (optimizer step, checkpoint load)."""
        arr = _coerce(data, f"parameter {self.pid}")
        if arr.shape != self.data.shape:
            raise ShapeError(f"parameter {self.pid}", "assignment shape mismatch",
                             arr.shape, self.data.shape)
        self.data = arr

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.pid!r}, shape={self.shape})"


class ParamStore:
    """Registry enforcing unique parameter ids within one model."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def create(
        self,
        pid: str,
        shape: Sequence[int],
        rng: np.random.Generator,
        init: str = "uniform_scaled",
        fan_in: int | None = None,
        bound: float | None = None,
        constant: float | None = None,
    ) -> Parameter:
        """Create, initialize, and register a parameter.

        ``uniform_scaled`` draws from [-1/sqrt(fan_in), 1/sqrt(fan_in)];
        ``uniform`` from [-bound, bound]; ``zeros`` / ``constant`` are exact.
        """
        if pid in self._params:
            raise ValueError(f"duplicate parameter id: {pid}")
        shape = check_dims(shape, f"parameter {pid}")
        if init == "uniform_scaled":
            if fan_in is None:
                raise ValueError(f"parameter {pid}: uniform_scaled needs fan_in")
            b = 1.0 / math.sqrt(fan_in)
            data = rng.uniform(-b, b, size=shape)
            spec = f"uniform_scaled(fan_in={fan_in})"
        elif init == "uniform":
            if bound is None:
                raise ValueError(f"parameter {pid}: uniform needs bound")
            data = rng.uniform(-bound, bound, size=shape)
            spec = f"uniform(bound={bound})"
        elif init == "zeros":
            data = np.zeros(shape)
            spec = "zeros"
        elif init == "constant":
            if constant is None:
                raise ValueError(f"parameter {pid}: constant needs a value")
            data = np.full(shape, float(constant))
            spec = f"constant({constant})"
        else:
            raise ValueError(f"parameter {pid}: unknown init {init!r}")
        p = Parameter(pid, data, init_spec=spec)
        self._params[pid] = p
        return p

    def __getitem__(self, pid: str) -> Parameter:
        return self._params[pid]

    def __contains__(self, pid: str) -> bool:
        return pid in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self):
        return iter(self._params.values())

    def ids(self) -> list[str]:
        return list(self._params)

    def state(self) -> dict[str, np.ndarray]:
        return {pid: p.data.copy() for pid, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ValueError(
                f"parameter state mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for pid, arr in state.items():
            self._params[pid].assign(arr)


class DiffGraph:
    """Topologically ordered record of the primitives reaching one node."""

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes = self._topo_order(root)

    @staticmethod
    def _topo_order(root: Tensor) -> list[Tensor]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self, params: Iterable[Parameter] | None = None) -> None:
        """Reverse sweep from the scalar root into parameter ``grad`` fields.

        Gradients of the given parameters are zeroed first, so parameters
        not reached by the graph end with exactly zero gradient. Each node
        is visited exactly once.
        """
        if self.root.data.ndim != 0:
            raise ShapeError("backward", "loss must be a scalar", self.root.shape)
        if params is None:
            params = [n for n in self.nodes if isinstance(n, Parameter)]
        for p in params:
            p.zero_grad()
        grads: dict[int, np.ndarray] = {id(self.root): np.ones(())}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if isinstance(node, Parameter):
                node.grad = node.grad + g
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                contrib = vjp(g)
                prev = grads.get(id(parent))
                grads[id(parent)] = contrib if prev is None else prev + contrib


def backward(loss: Tensor, params: Iterable[Parameter] | None = None) -> None:
    """Populate ``grad`` for all (given) parameters reachable from ``loss``."""
    DiffGraph(loss).backward(params)
