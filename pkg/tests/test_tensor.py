import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mambafusion.tensor import (
    Tensor,
    absolute,
    backward,
    concat,
    exp,
    flip,
    maximum,
    no_grad,
    reshape,
    sigmoid,
    silu,
    slice_,
    softplus,
    transpose,
)

from conftest import finite_diff_check

rng = np.random.default_rng(42)


def test_sum_grad_is_ones():
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    backward(x.sum())
    assert np.array_equal(x.grad, np.ones((3, 4)))


def test_square_sum_grad_is_2x():
    x = Tensor(rng.standard_normal((5,)), requires_grad=True)
    backward((x * x).sum())
    assert np.allclose(x.grad, 2 * x.data, atol=1e-15)


def test_backward_requires_scalar():
    x = Tensor(rng.standard_normal((3,)), requires_grad=True)
    with pytest.raises(ValueError):
        backward(x * 2)


def test_grad_accumulates_over_multiple_uses():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * 3 + x * x
    backward(y.sum())
    assert np.allclose(x.grad, [3 + 2 * 2.0])


def test_broadcast_unbroadcast_grads():
    a = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((3, 1)), requires_grad=True)
    backward(((a + b) * 2).sum())
    assert a.grad.shape == a.shape
    assert b.grad.shape == b.shape
    assert np.allclose(b.grad, np.full((3, 1), 2.0 * 2 * 4))


def test_no_grad_builds_no_graph():
    x = Tensor(rng.standard_normal((3,)), requires_grad=True)
    with no_grad():
        y = (x * x).sum()
    assert y.creator is None and not y.requires_grad


def test_activation_point_values():
    assert silu(Tensor(0.0)).item() == 0.0
    assert np.allclose(sigmoid(Tensor(0.0)).item(), 0.5)
    from mambafusion.tensor import relu

    assert relu(Tensor(-1.0)).item() == 0.0


@settings(max_examples=30, derandomize=True)
@given(st.floats(min_value=-30, max_value=30))
def test_sigmoid_symmetry(x):
    s = sigmoid(Tensor(x)).item() + sigmoid(Tensor(-x)).item()
    assert abs(s - 1.0) <= 1e-12


def test_silu_gradient_at_zero_is_half():
    x = Tensor(np.array([0.0]), requires_grad=True)
    backward(silu(x).sum())
    assert np.allclose(x.grad, [0.5])
    x2 = Tensor(rng.standard_normal((16,)) * 2, requires_grad=True)
    finite_diff_check(lambda: silu(x2).sum(), [x2], rel_tol=1e-6)


def test_softplus_positive_and_grad():
    x = Tensor(np.array([-40.0, -1.0, 0.0, 5.0, 40.0]), requires_grad=True)
    y = softplus(x)
    assert np.all(y.data >= 0)
    assert np.isfinite(y.data).all()
    x2 = Tensor(rng.standard_normal((8,)), requires_grad=True)
    finite_diff_check(lambda: (softplus(x2) ** 2).sum(), [x2], rel_tol=1e-6)


def test_elementwise_grad_suite():
    shapes = [(4,), (2, 3)]
    for shape in shapes:
        x = Tensor(rng.standard_normal(shape) + 3.0, requires_grad=True)
        y = Tensor(rng.standard_normal(shape) + 3.0, requires_grad=True)
        finite_diff_check(lambda: (x * y + x / y - y + exp(x * 0.1)).sum(), [x, y], rel_tol=1e-5)


def test_maximum_matches_numpy_and_splits_ties():
    a = Tensor(np.array([1.0, 5.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([3.0, 5.0, 0.0]), requires_grad=True)
    m = maximum(a, b)
    assert np.array_equal(m.data, [3.0, 5.0, 2.0])
    backward(m.sum())
    assert np.allclose(a.grad, [0.0, 0.5, 1.0])
    assert np.allclose(b.grad, [1.0, 0.5, 0.0])


def test_abs_grad_sign():
    x = Tensor(np.array([-2.0, 3.0]), requires_grad=True)
    backward(absolute(x).sum())
    assert np.array_equal(x.grad, [-1.0, 1.0])


def test_shape_ops_roundtrip_grads():
    x = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)

    def build():
        y = transpose(x, (1, 0, 2))
        y = reshape(y, (3, 8))
        y = flip(y, axis=1)
        return (y * y).sum()

    finite_diff_check(build, [x], rel_tol=1e-6, max_entries=12)


def test_concat_slice_grads():
    a = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal((2, 2)), requires_grad=True)

    def build():
        y = concat([a, b], axis=1)
        z = slice_(y, (slice(None), slice(1, 4)))
        return (z**2).sum()

    finite_diff_check(build, [a, b], rel_tol=1e-6)


@settings(max_examples=20, derandomize=True)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=5))
def test_mean_matches_numpy(n, m):
    x = rng.standard_normal((n, m))
    assert np.allclose(Tensor(x).mean().item(), x.mean())
    assert np.allclose(Tensor(x).mean(axis=1).data, x.mean(axis=1))


def test_forward_ops_stay_finite_on_finite_input():
    x = Tensor(rng.standard_normal((64,)) * 10)
    for fn in (exp, sigmoid, silu, softplus, absolute):
        assert np.isfinite(fn(x * 0.1).data).all()
