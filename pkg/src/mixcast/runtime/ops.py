"""Primitive operations: forward values plus exact vector-Jacobian products.

Every primitive validates operand shapes (raising :class:`ShapeError` naming
the operation and both shapes), computes the forward value, and registers
one VJP per differentiable operand. Elementwise primitives follow numpy
broadcasting; gradients are summed back down to each operand's shape.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, check_dims

__all__ = [
    "as_tensor", "const", "add", "sub", "mul", "div", "neg",
    "exp", "log", "sqrt", "tanh", "sigmoid", "relu", "clip_min",
    "matmul", "transpose", "reshape", "softmax", "log_softmax",
    "concat", "sum", "mean", "broadcast_to", "take_along_axis",
    "take_index", "mask_fill", "stop_gradient", "dilated_causal_conv1d",
]

_builtin_sum = sum


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def const(x) -> Tensor:
    """A constant leaf (no gradient flows into it)."""
    return Tensor(np.array(x, dtype=np.float64))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcastable(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, "operands do not broadcast", a.shape, b.shape) from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcastable(a, b, "add")
    return Tensor(a.data + b.data, (a, b),
                  (lambda g: _unbroadcast(g, a.shape),
                   lambda g: _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcastable(a, b, "sub")
    return Tensor(a.data - b.data, (a, b),
                  (lambda g: _unbroadcast(g, a.shape),
                   lambda g: _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcastable(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor(ad * bd, (a, b),
                  (lambda g: _unbroadcast(g * bd, a.shape),
                   lambda g: _unbroadcast(g * ad, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcastable(a, b, "div")
    ad, bd = a.data, b.data
    with np.errstate(divide="ignore", invalid="ignore"):
        y = ad / bd
    return Tensor(y, (a, b),
                  (lambda g: _unbroadcast(g / bd, a.shape),
                   lambda g: _unbroadcast(-g * ad / (bd * bd), b.shape)), "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(-a.data, (a,), (lambda g: -g,), "neg")


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        y = np.exp(a.data)
    return Tensor(y, (a,), (lambda g: g * y,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(ad)
    return Tensor(y, (a,), (lambda g: g / ad,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(invalid="ignore"):
        y = np.sqrt(a.data)
    return Tensor(y, (a,), (lambda g: g * 0.5 / y,), "sqrt")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return Tensor(y, (a,), (lambda g: g * (1.0 - y * y),), "tanh")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return Tensor(y, (a,), (lambda g: g * y * (1.0 - y),), "sigmoid")


def relu(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return Tensor(np.maximum(x, 0.0), (a,), (lambda g: g * (x > 0),), "relu")


def clip_min(a, lo: float) -> Tensor:
    """max(x, lo) elementwise; gradient passes only where x > lo."""
    a = as_tensor(a)
    x = a.data
    return Tensor(np.maximum(x, lo), (a,), (lambda g: g * (x > lo),), "clip_min")


def matmul(a, b) -> Tensor:
    """Matrix product over the last axes.

    Supports ``x (..., k) @ w (k, m)`` (includes matvec for 1-d x) and
    stacked ``x (..., n, k) @ w (..., k, m)`` with identical leading dims.
    """
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise ShapeError("matmul", "operands must have rank >= 1", a.shape, b.shape)
    if bd.ndim == 2:
        if ad.shape[-1] != bd.shape[0]:
            raise ShapeError("matmul", "inner dimensions differ", a.shape, b.shape)
        k, m = bd.shape

        def vjp_a(g):
            return g @ bd.T

        def vjp_b(g):
            return ad.reshape(-1, k).T @ g.reshape(-1, m)

        return Tensor(ad @ bd, (a, b), (vjp_a, vjp_b), "matmul")
    if ad.ndim == bd.ndim and ad.ndim >= 3 and ad.shape[:-2] == bd.shape[:-2]:
        if ad.shape[-1] != bd.shape[-2]:
            raise ShapeError("matmul", "inner dimensions differ", a.shape, b.shape)
        return Tensor(ad @ bd, (a, b),
                      (lambda g: g @ np.swapaxes(bd, -1, -2),
                       lambda g: np.swapaxes(ad, -1, -2) @ g), "matmul")
    raise ShapeError("matmul", "unsupported operand ranks (need 2-d rhs or equal "
                     "leading dims)", a.shape, b.shape)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    if sorted(axes) != list(range(a.data.ndim)):
        raise ShapeError("transpose", f"axes {axes} not a permutation", a.shape)
    inv = tuple(np.argsort(axes))
    return Tensor(np.transpose(a.data, axes), (a,),
                  (lambda g: np.transpose(g, inv),), "transpose")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        y = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", f"cannot reshape to {tuple(shape)}", a.shape) from None
    check_dims(y.shape, "reshape")
    src = a.shape
    return Tensor(y, (a,), (lambda g: g.reshape(src),), "reshape")


def _norm_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        return (g - np.sum(g * y, axis=axis, keepdims=True)) * y

    return Tensor(y, (a,), (vjp,), "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    lse = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))
    y = x - lse

    def vjp(g):
        return g - np.exp(y) * np.sum(g, axis=axis, keepdims=True)

    return Tensor(y, (a,), (vjp,), "log_softmax")


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat", "no operands")
    ndim = parts[0].data.ndim
    axis = axis % ndim
    for p in parts[1:]:
        if p.data.ndim != ndim:
            raise ShapeError("concat", "rank mismatch", parts[0].shape, p.shape)
        for d in range(ndim):
            if d != axis and p.shape[d] != parts[0].shape[d]:
                raise ShapeError("concat", f"dim {d} mismatch", parts[0].shape, p.shape)
    y = np.concatenate([p.data for p in parts], axis=axis)
    vjps = []
    start = 0
    for p in parts:
        stop = start + p.shape[axis]
        sl = (slice(None),) * axis + (slice(start, stop),)

        def vjp(g, sl=sl):
            return g[sl]

        vjps.append(vjp)
        start = stop
    return Tensor(y, tuple(parts), tuple(vjps), "concat")


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    x = a.data
    axes = _norm_axes(axis, x.ndim)
    y = np.asarray(np.sum(x, axis=axes, keepdims=keepdims))

    def vjp(g):
        ge = g if keepdims or x.ndim == 0 else np.expand_dims(g, axes)
        return np.broadcast_to(ge, x.shape)

    return Tensor(y, (a,), (vjp,), "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    x = a.data
    axes = _norm_axes(axis, x.ndim)
    count = 1
    for ax in axes:
        count *= x.shape[ax]
    y = np.asarray(np.mean(x, axis=axes, keepdims=keepdims))

    def vjp(g):
        ge = g if keepdims or x.ndim == 0 else np.expand_dims(g, axes)
        return np.broadcast_to(ge, x.shape) / count

    return Tensor(y, (a,), (vjp,), "mean")


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = check_dims(shape, "broadcast_to")
    try:
        y = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError("broadcast_to", "incompatible target", a.shape, shape) from None
    src = a.shape
    return Tensor(y.copy(), (a,), (lambda g: _unbroadcast(g, src),), "broadcast_to")


def take_along_axis(a, idx: np.ndarray, axis: int) -> Tensor:
    """Gather along one axis with integer indices (constant, no gradient).

    The backward pass scatter-adds the incoming gradient back to the
    gathered source positions.
    """
    a = as_tensor(a)
    x = a.data
    idx = np.asarray(idx)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("take_along_axis", "indices must be integers", idx.shape)
    if idx.ndim != x.ndim:
        raise ShapeError("take_along_axis", "index rank must match input",
                         x.shape, idx.shape)
    axis = axis % x.ndim
    for d in range(x.ndim):
        if d != axis and idx.shape[d] != x.shape[d]:
            raise ShapeError("take_along_axis", f"dim {d} mismatch", x.shape, idx.shape)
    y = np.take_along_axis(x, idx, axis=axis)

    def vjp(g):
        z = np.zeros_like(x)
        grids = list(np.ogrid[tuple(slice(0, s) for s in idx.shape)])
        grids[axis] = idx
        np.add.at(z, tuple(grids), g)
        return z

    return Tensor(y, (a,), (vjp,), "take_along_axis")


def take_index(a, axis: int, index: int) -> Tensor:
    """Select one slice at a fixed position along an axis."""
    a = as_tensor(a)
    x = a.data
    axis = axis % x.ndim
    if not -x.shape[axis] <= index < x.shape[axis]:
        raise ShapeError("take_index", f"index {index} out of range", x.shape)
    index = index % x.shape[axis]
    y = np.take(x, index, axis=axis)

    def vjp(g):
        z = np.zeros_like(x)
        z[(slice(None),) * axis + (index,)] = g
        return z

    return Tensor(np.asarray(y), (a,), (vjp,), "take_index")


def mask_fill(a, mask: np.ndarray, fill) -> Tensor:
    """Replace masked entries with constant fill values; gradient is blocked
    on masked entries and passes unchanged elsewhere."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    y = np.where(mask, np.asarray(fill, dtype=np.float64), a.data)
    src = a.shape

    def vjp(g):
        return _unbroadcast(np.where(mask, 0.0, g), src)

    return Tensor(y, (a,), (vjp,), "mask_fill")


def stop_gradient(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.copy(), (), (), "stop_gradient")


def dilated_causal_conv1d(a, kernel, dilation: int, time_axis: int = 1) -> Tensor:
    """Dilated causal convolution along one time axis, channels last.

    Input ``(..., T at time_axis, ..., c_in)``, kernel ``(k, c_in, c_out)``.
    The time axis is left-padded with ``dilation * (k - 1)`` zeros so the
    output keeps length T; kernel tap ``j`` reads the input at offset
    ``t - dilation * (k - 1 - j)``, i.e. the last tap is the current step.
    """
    a, kernel = as_tensor(a), as_tensor(kernel)
    x, w = a.data, kernel.data
    if w.ndim != 3:
        raise ShapeError("dilated_causal_conv1d", "kernel must be (k, c_in, c_out)",
                         kernel.shape)
    if x.ndim < 2:
        raise ShapeError("dilated_causal_conv1d", "input needs time and channel axes",
                         a.shape)
    if dilation < 1:
        raise ShapeError("dilated_causal_conv1d", f"dilation {dilation} must be >= 1")
    ta = time_axis % x.ndim
    if ta == x.ndim - 1:
        raise ShapeError("dilated_causal_conv1d", "time axis cannot be the channel axis",
                         a.shape)
    if x.shape[-1] != w.shape[1]:
        raise ShapeError("dilated_causal_conv1d", "channel count mismatch",
                         a.shape, kernel.shape)
    ks = w.shape[0]
    pad = dilation * (ks - 1)
    xm = np.moveaxis(x, ta, -2)                        # (..., T, c_in)
    T = xm.shape[-2]
    width = [(0, 0)] * (xm.ndim - 2) + [(pad, 0), (0, 0)]
    xp = np.pad(xm, width)
    out = np.zeros(xm.shape[:-1] + (w.shape[2],))
    for j in range(ks):
        out += xp[..., j * dilation: j * dilation + T, :] @ w[j]
    y = np.moveaxis(out, -2, ta)

    def vjp_x(g):
        gm = np.moveaxis(g, ta, -2)
        dxp = np.zeros_like(xp)
        for j in range(ks):
            dxp[..., j * dilation: j * dilation + T, :] += gm @ w[j].T
        return np.moveaxis(dxp[..., pad:, :], -2, ta)

    def vjp_w(g):
        gm = np.moveaxis(g, ta, -2)
        dw = np.zeros_like(w)
        red = tuple(range(xm.ndim - 1))
        for j in range(ks):
            dw[j] = np.tensordot(xp[..., j * dilation: j * dilation + T, :], gm,
                                 axes=(red, red))
        return dw

    return Tensor(y, (a, kernel), (vjp_x, vjp_w), "dilated_causal_conv1d")
