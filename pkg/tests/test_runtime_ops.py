"""Primitive forward values and vector-Jacobian products.

Every differentiable primitive is checked against central finite
differences (delta=1e-4, relative error < 1e-6) over randomized shapes and
values in [-2, 2]; primitives with restricted domains (log, sqrt, div
denominators) shift their samples into the valid region, and kinked
primitives (relu, clip_min) are nudged away from the kink so the central
difference is meaningful.
"""

import numpy as np
import pytest

from mixcast.runtime import (
    NumericError,
    Parameter,
    ShapeError,
    Tensor,
    backward,
    grad_check,
    ops,
    suspend_finite_checks,
)

DELTA = 1e-4
TOL = 1e-6


def _uniform(rng, shape, low=-2.0, high=2.0):
    return rng.uniform(low, high, size=shape)


def _positive(rng, shape):
    return np.abs(_uniform(rng, shape)) + 0.5


def _away_from(x, point, margin=0.15):
    shifted = np.where(np.abs(x - point) < margin,
                       x + np.sign(x - point + 1e-12) * margin, x)
    return shifted


def _rand_shape(rng, max_rank=3, max_dim=5):
    rank = int(rng.integers(1, max_rank + 1))
    return tuple(int(d) for d in rng.integers(1, max_dim + 1, size=rank))


def _weighted_sum(t, rng):
    w = rng.standard_normal(t.shape)
    return ops.sum(ops.mul(t, ops.const(w)))


def _check(build_loss, params):
    report = grad_check(build_loss, params, delta=DELTA, tol=TOL,
                        max_entries_per_param=None)
    assert report.passed, report.format()


def _case_elementwise_binary(op_name):
    def build(rng):
        shape = _rand_shape(rng)
        a = Parameter("a", _uniform(rng, shape))
        # One broadcast operand exercises the gradient un-broadcast path.
        bshape = shape if rng.random() < 0.5 else shape[-1:]
        bdata = _uniform(rng, bshape)
        if op_name == "div":
            bdata = _positive(rng, bshape)
        b = Parameter("b", bdata)
        fn = getattr(ops, op_name)
        return [a, b], lambda: _weighted_sum(fn(a, b), np.random.default_rng(7))

    return build


def _case_unary(op_name):
    def build(rng):
        shape = _rand_shape(rng)
        x = _uniform(rng, shape)
        if op_name in ("log", "sqrt"):
            x = _positive(rng, shape)
        if op_name == "relu":
            x = _away_from(x, 0.0)
        a = Parameter("a", x)
        fn = getattr(ops, op_name)
        return [a], lambda: _weighted_sum(fn(a), np.random.default_rng(7))

    return build


def _case_clip_min(rng):
    a = Parameter("a", _away_from(_uniform(rng, _rand_shape(rng)), 0.5))
    return [a], lambda: _weighted_sum(ops.clip_min(a, 0.5), np.random.default_rng(7))


def _case_matmul_2d(rng):
    n, k, m = (int(d) for d in rng.integers(1, 5, size=3))
    a = Parameter("a", _uniform(rng, (n, k)))
    b = Parameter("b", _uniform(rng, (k, m)))
    return [a, b], lambda: _weighted_sum(ops.matmul(a, b), np.random.default_rng(7))


def _case_matvec(rng):
    k, m = (int(d) for d in rng.integers(1, 5, size=2))
    a = Parameter("a", _uniform(rng, (k,)))
    b = Parameter("b", _uniform(rng, (k, m)))
    return [a, b], lambda: _weighted_sum(ops.matmul(a, b), np.random.default_rng(7))


def _case_matmul_batched(rng):
    b_, n, k, m = (int(d) for d in rng.integers(1, 4, size=4))
    a = Parameter("a", _uniform(rng, (b_, n, k)))
    b = Parameter("b", _uniform(rng, (b_, k, m)))
    return [a, b], lambda: _weighted_sum(ops.matmul(a, b), np.random.default_rng(7))


def _case_softmax(rng):
    shape = _rand_shape(rng)
    axis = int(rng.integers(0, len(shape)))
    a = Parameter("a", _uniform(rng, shape))
    return [a], lambda: _weighted_sum(ops.softmax(a, axis=axis),
                                      np.random.default_rng(7))


def _case_log_softmax(rng):
    shape = _rand_shape(rng)
    axis = int(rng.integers(0, len(shape)))
    a = Parameter("a", _uniform(rng, shape))
    return [a], lambda: _weighted_sum(ops.log_softmax(a, axis=axis),
                                      np.random.default_rng(7))


def _case_concat(rng):
    base = _rand_shape(rng)
    axis = int(rng.integers(0, len(base)))
    shapes = []
    for _ in range(3):
        s = list(base)
        s[axis] = int(rng.integers(1, 4))
        shapes.append(tuple(s))
    params = [Parameter(f"p{i}", _uniform(rng, s)) for i, s in enumerate(shapes)]
    return params, lambda: _weighted_sum(ops.concat(params, axis=axis),
                                         np.random.default_rng(7))


def _case_sum(rng):
    shape = _rand_shape(rng)
    axis = int(rng.integers(0, len(shape)))
    a = Parameter("a", _uniform(rng, shape))
    keep = bool(rng.random() < 0.5)
    return [a], lambda: _weighted_sum(ops.sum(a, axis=axis, keepdims=keep),
                                      np.random.default_rng(7))


def _case_mean(rng):
    shape = _rand_shape(rng)
    a = Parameter("a", _uniform(rng, shape))
    return [a], lambda: _weighted_sum(ops.mean(a, axis=tuple(range(len(shape)))[:1]),
                                      np.random.default_rng(7))


def _case_broadcast_to(rng):
    inner = _rand_shape(rng, max_rank=2)
    target = (3,) + inner
    a = Parameter("a", _uniform(rng, inner))
    return [a], lambda: _weighted_sum(ops.broadcast_to(a, target),
                                      np.random.default_rng(7))


def _case_gather(rng):
    shape = (int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(2, 6)))
    a = Parameter("a", _uniform(rng, shape))
    idx = rng.integers(0, shape[-1], size=shape[:-1] + (1,))
    return [a], lambda: _weighted_sum(ops.take_along_axis(a, idx, axis=-1),
                                      np.random.default_rng(7))


def _case_take_index(rng):
    shape = _rand_shape(rng, max_rank=3)
    axis = int(rng.integers(0, len(shape)))
    index = int(rng.integers(0, shape[axis]))
    a = Parameter("a", _uniform(rng, shape))
    return [a], lambda: _weighted_sum(ops.take_index(a, axis, index),
                                      np.random.default_rng(7))


def _case_mask_fill(rng):
    shape = _rand_shape(rng)
    a = Parameter("a", _uniform(rng, shape))
    mask = rng.random(shape) < 0.3
    return [a], lambda: _weighted_sum(ops.mask_fill(a, mask, 9.0),
                                      np.random.default_rng(7))


def _case_conv(rng):
    T = int(rng.integers(3, 9))
    cin = int(rng.integers(1, 4))
    cout = int(rng.integers(1, 4))
    ks = int(rng.integers(1, 4))
    dilation = int(rng.integers(1, 4))
    lead = int(rng.integers(1, 3))
    x = Parameter("x", _uniform(rng, (lead, T, cin)))
    w = Parameter("w", _uniform(rng, (ks, cin, cout)))
    return [x, w], lambda: _weighted_sum(
        ops.dilated_causal_conv1d(x, w, dilation=dilation, time_axis=1),
        np.random.default_rng(7))


CASES = {
    "add": _case_elementwise_binary("add"),
    "sub": _case_elementwise_binary("sub"),
    "mul": _case_elementwise_binary("mul"),
    "div": _case_elementwise_binary("div"),
    "exp": _case_unary("exp"),
    "log": _case_unary("log"),
    "sqrt": _case_unary("sqrt"),
    "tanh": _case_unary("tanh"),
    "sigmoid": _case_unary("sigmoid"),
    "relu": _case_unary("relu"),
    "neg": _case_unary("neg"),
    "clip_min": _case_clip_min,
    "matmul_2d": _case_matmul_2d,
    "matvec": _case_matvec,
    "matmul_batched": _case_matmul_batched,
    "softmax": _case_softmax,
    "log_softmax": _case_log_softmax,
    "concat": _case_concat,
    "sum": _case_sum,
    "mean": _case_mean,
    "broadcast_to": _case_broadcast_to,
    "take_along_axis": _case_gather,
    "take_index": _case_take_index,
    "mask_fill": _case_mask_fill,
    "dilated_causal_conv1d": _case_conv,
}


@pytest.mark.parametrize("name", sorted(CASES))
@pytest.mark.parametrize("seed", range(5))
def test_primitive_vjp_matches_finite_differences(name, seed):
    rng = np.random.default_rng(1000 * seed + hash(name) % 1000)
    params, build_loss = CASES[name](rng)
    _check(build_loss, params)


class TestForwardValues:
    def test_softmax_known_logits(self):
        out = ops.softmax(Tensor([np.log(2.0), 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [0.5, 0.25, 0.25], rtol=0, atol=1e-15)

    def test_softmax_normalizes_and_stays_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.uniform(-30, 30, size=(4, 7))
            s = ops.softmax(Tensor(x), axis=1).data
            assert np.all(s > 0) and np.all(s < 1)
            np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_conv_identity_tap(self):
        x = np.arange(1.0, 9.0)
        out = ops.dilated_causal_conv1d(
            Tensor(x.reshape(8, 1)), Tensor(np.array([0.0, 1.0]).reshape(2, 1, 1)),
            dilation=2, time_axis=0)
        np.testing.assert_array_equal(out.data.ravel(), x)

    def test_conv_pure_shift(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        out = ops.dilated_causal_conv1d(
            Tensor(x.reshape(4, 1)), Tensor(np.array([1.0, 0.0]).reshape(2, 1, 1)),
            dilation=1, time_axis=0)
        np.testing.assert_array_equal(out.data.ravel(), [0.0, 1.0, 2.0, 3.0])

    def test_conv_zero_kernel_gives_zero_output(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((2, 6, 3)))
        w = Tensor(np.zeros((2, 3, 4)))
        out = ops.dilated_causal_conv1d(x, w, dilation=2)
        assert np.all(out.data == 0.0)

    def test_conv_causality_exact(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((8, 2))
        w = rng.standard_normal((2, 2, 3))
        base = ops.dilated_causal_conv1d(Tensor(x), Tensor(w), dilation=3,
                                         time_axis=0).data
        for t in range(8):
            xp = x.copy()
            xp[t] += rng.standard_normal(2)
            out = ops.dilated_causal_conv1d(Tensor(xp), Tensor(w), dilation=3,
                                            time_axis=0).data
            assert np.array_equal(out[:t], base[:t])
            assert not np.array_equal(out[t:], base[t:])

    def test_concat_then_split_is_bit_exact(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 2))
        b = rng.standard_normal((3, 4))
        cat = ops.concat([Tensor(a), Tensor(b)], axis=1).data
        assert np.array_equal(cat[:, :2], a)
        assert np.array_equal(cat[:, 2:], b)


class TestBackwardSemantics:
    def test_sum_gradient_is_ones(self):
        p = Parameter("p", [1.0, 5.0, -2.0])
        backward(ops.sum(p), [p])
        np.testing.assert_array_equal(p.grad, [1.0, 1.0, 1.0])

    def test_quadratic_gradient(self):
        p = Parameter("p", [1.0, 2.0])
        backward(ops.sum(ops.mul(p, p)), [p])
        np.testing.assert_array_equal(p.grad, [2.0, 4.0])

    def test_unused_parameter_gets_exact_zero(self):
        used = Parameter("used", [3.0])
        unused = Parameter("unused", [[1.0, 2.0]])
        unused.grad[:] = 7.0  # stale gradient must be wiped
        backward(ops.sum(used), [used, unused])
        np.testing.assert_array_equal(unused.grad, np.zeros((1, 2)))

    def test_gradients_zeroed_between_backward_calls(self):
        p = Parameter("p", [1.0, 1.0])
        backward(ops.sum(p), [p])
        backward(ops.sum(p), [p])
        np.testing.assert_array_equal(p.grad, [1.0, 1.0])

    def test_shared_subexpression_visited_once(self):
        p = Parameter("p", [2.0])
        shared = ops.mul(p, p)
        loss = ops.sum(ops.add(shared, shared))
        calls = {"n": 0}
        original = shared.vjps

        def counting(g, fn=original[0]):
            calls["n"] += 1
            return fn(g)

        shared.vjps = (counting, original[1])
        backward(loss, [p])
        assert calls["n"] == 1
        np.testing.assert_array_equal(p.grad, [8.0])  # d/dp of 2p^2

    def test_non_scalar_loss_rejected(self):
        p = Parameter("p", [1.0, 2.0])
        with pytest.raises(ShapeError, match="scalar"):
            backward(ops.mul(p, p), [p])


class TestErrors:
    def test_shape_error_names_operation_and_shapes(self):
        with pytest.raises(ShapeError) as exc:
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))
        assert "matmul" in str(exc.value)
        assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)

    def test_broadcast_mismatch_rejected(self):
        with pytest.raises(ShapeError, match="add"):
            ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))

    def test_rank_limit_enforced(self):
        with pytest.raises(ShapeError, match="rank"):
            Tensor(np.ones((1, 1, 1, 1, 1, 1)))

    def test_nonfinite_result_raises(self):
        with pytest.raises(NumericError, match="div"):
            ops.div(Tensor([1.0]), Tensor([0.0]))

    def test_suspend_finite_checks_scopes_the_exemption(self):
        with suspend_finite_checks():
            t = ops.log(ops.relu(Tensor([0.0, 1.0])) * 1.0)
            assert np.isneginf(t.data[0])
        with pytest.raises(NumericError):
            ops.log(Tensor([0.0]))
