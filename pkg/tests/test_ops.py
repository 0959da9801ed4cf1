import numpy as np
import pytest

from mambafusion import ops
from mambafusion.tensor import ShapeError, Tensor, backward

from conftest import finite_diff_check

rng = np.random.default_rng(7)


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------


def conv2d_loops(x, w, b, pad, stride=1):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for nn in range(n):
        for oo in range(o):
            for i in range(oh):
                for j in range(ow):
                    acc = b[oo]
                    for cc in range(c):
                        for di in range(k):
                            for dj in range(k):
                                acc += xp[nn, cc, i * stride + di, j * stride + dj] * w[oo, cc, di, dj]
                    out[nn, oo, i, j] = acc
    return out


def depthwise_loops(x, w, b):
    n, c, h, wd = x.shape
    k = w.shape[2]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros_like(x)
    for nn in range(n):
        for cc in range(c):
            for i in range(h):
                for j in range(wd):
                    acc = b[cc]
                    for di in range(k):
                        for dj in range(k):
                            acc += xp[nn, cc, i + di, j + dj] * w[cc, 0, di, dj]
                    out[nn, cc, i, j] = acc
    return out


# ---------------------------------------------------------------------------
# conv2d
# ---------------------------------------------------------------------------


def test_conv2d_identity_kernel():
    x = rng.uniform(0, 1, (1, 1, 3, 3))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    out = ops.conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(1)))
    assert np.allclose(out.data, x, atol=0)


def test_conv2d_zero_input_gives_bias():
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    out = ops.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(w), Tensor(b))
    for oo in range(3):
        assert np.allclose(out.data[0, oo], b[oo], atol=0)


def test_conv2d_matches_loop_oracle():
    x = rng.standard_normal((1, 2, 4, 4))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    got = ops.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert np.abs(got - conv2d_loops(x, w, b, pad=1)).max() <= 1e-12


def test_conv2d_1x1_and_stride_match_oracle():
    x = rng.standard_normal((2, 3, 6, 6))
    w1 = rng.standard_normal((4, 3, 1, 1))
    b1 = rng.standard_normal(4)
    got = ops.conv2d(Tensor(x), Tensor(w1), Tensor(b1)).data
    assert np.abs(got - conv2d_loops(x, w1, b1, pad=0)).max() <= 1e-12
    w3 = rng.standard_normal((2, 3, 3, 3))
    b3 = rng.standard_normal(2)
    got2 = ops.conv2d(Tensor(x), Tensor(w3), Tensor(b3), stride=2).data
    assert np.abs(got2 - conv2d_loops(x, w3, b3, pad=1, stride=2)).max() <= 1e-12


def test_conv2d_channel_mismatch_raises():
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))


def test_conv2d_grads():
    x = Tensor(rng.standard_normal((2, 2, 5, 5)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.4, requires_grad=True)
    b = Tensor(rng.standard_normal(3) * 0.1, requires_grad=True)
    finite_diff_check(lambda: (ops.conv2d(x, w, b) ** 2).sum(), [x, w, b], rel_tol=1e-5, max_entries=20)


# ---------------------------------------------------------------------------
# depthwise
# ---------------------------------------------------------------------------


def test_depthwise_identity_kernels():
    x = rng.uniform(0, 1, (1, 3, 4, 4))
    w = np.zeros((3, 1, 3, 3))
    w[:, 0, 1, 1] = 1.0
    out = ops.depthwise_conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(3)))
    assert np.allclose(out.data, x, atol=0)


def test_depthwise_channel_independence():
    x = np.zeros((1, 2, 4, 4))
    x[0, 0] = rng.standard_normal((4, 4))
    w = rng.standard_normal((2, 1, 3, 3))
    b = np.array([0.0, 0.7])
    out = ops.depthwise_conv2d(Tensor(x), Tensor(w), Tensor(b))
    assert np.allclose(out.data[0, 1], 0.7, atol=0)


def test_depthwise_matches_loop_oracle():
    x = rng.standard_normal((2, 3, 4, 4))
    w = rng.standard_normal((3, 1, 3, 3))
    b = rng.standard_normal(3)
    got = ops.depthwise_conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert np.abs(got - depthwise_loops(x, w, b)).max() <= 1e-12


def test_depthwise_grads():
    x = Tensor(rng.standard_normal((1, 3, 4, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 1, 3, 3)) * 0.4, requires_grad=True)
    b = Tensor(rng.standard_normal(3) * 0.1, requires_grad=True)
    finite_diff_check(lambda: (ops.depthwise_conv2d(x, w, b) ** 2).sum(), [x, w, b], rel_tol=1e-5)


# ---------------------------------------------------------------------------
# linear
# ---------------------------------------------------------------------------


def test_linear_identity_and_constant():
    x = rng.standard_normal((4, 3))
    assert np.allclose(ops.linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3))).data, x, atol=0)
    out = ops.linear(Tensor(x), Tensor(np.zeros((2, 3))), Tensor(np.array([1.5, -2.0])))
    assert np.allclose(out.data, np.tile([1.5, -2.0], (4, 1)), atol=0)


def test_linear_matches_dot_oracle():
    x = rng.standard_normal((5, 3))
    w = rng.standard_normal((2, 3))
    b = rng.standard_normal(2)
    want = np.array([[x[i] @ w[o] + b[o] for o in range(2)] for i in range(5)])
    assert np.abs(ops.linear(Tensor(x), Tensor(w), Tensor(b)).data - want).max() <= 1e-12


def test_linear_trailing_dim_mismatch():
    with pytest.raises(ShapeError):
        ops.linear(Tensor(np.zeros((4, 3))), Tensor(np.zeros((2, 5))))


def test_channel_linear_equals_1x1_conv():
    x = rng.standard_normal((2, 3, 4, 5))
    w = rng.standard_normal((6, 3))
    b = rng.standard_normal(6)
    got = ops.channel_linear(Tensor(x), Tensor(w), Tensor(b)).data
    want = ops.conv2d(Tensor(x), Tensor(w[:, :, None, None]), Tensor(b)).data
    assert np.abs(got - want).max() <= 1e-12


# ---------------------------------------------------------------------------
# layer norm
# ---------------------------------------------------------------------------


def test_layer_norm_constant_channels_gives_beta():
    x = np.tile(rng.standard_normal((1, 1, 3, 3)), (1, 4, 1, 1))
    beta = rng.standard_normal(4)
    out = ops.layer_norm(Tensor(x), Tensor(np.ones(4)), Tensor(beta))
    assert np.abs(out.data - beta[None, :, None, None]).max() <= 1e-9


def test_layer_norm_standardizes():
    x = rng.standard_normal((2, 8, 3, 3))
    out = ops.layer_norm(Tensor(x), Tensor(np.ones(8)), Tensor(np.zeros(8))).data
    assert np.abs(out.mean(axis=1)).max() <= 1e-9
    assert np.abs(out.var(axis=1) - 1.0).max() <= 1e-4


def test_layer_norm_matches_two_pass_oracle():
    x = rng.standard_normal((2, 5, 3, 4))
    gamma = rng.standard_normal(5)
    beta = rng.standard_normal(5)
    got = ops.layer_norm(Tensor(x), Tensor(gamma), Tensor(beta)).data
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    want = gamma[None, :, None, None] * (x - mu) / np.sqrt(var + 1e-6) + beta[None, :, None, None]
    assert np.abs(got - want).max() <= 1e-10


def test_layer_norm_offset_invariance():
    x = rng.standard_normal((1, 6, 4, 4))
    offset = rng.standard_normal((1, 1, 4, 4))  # constant across channels
    g = Tensor(rng.standard_normal(6))
    z = Tensor(np.zeros(6))
    a = ops.layer_norm(Tensor(x), g, z).data
    b = ops.layer_norm(Tensor(x + offset), g, z).data
    assert np.abs(a - b).max() <= 1e-9


def test_layer_norm_grads():
    x = Tensor(rng.standard_normal((1, 4, 3, 3)), requires_grad=True)
    g = Tensor(rng.standard_normal(4), requires_grad=True)
    b = Tensor(rng.standard_normal(4), requires_grad=True)
    finite_diff_check(lambda: (ops.layer_norm(x, g, b) ** 3).sum(), [x, g, b], rel_tol=1e-5)


# ---------------------------------------------------------------------------
# pooling / resampling
# ---------------------------------------------------------------------------


def test_pool_constants():
    c = 0.37
    x = Tensor(np.full((1, 2, 4, 4), c))
    assert np.allclose(ops.gap(x).data, c, atol=0)
    assert np.allclose(ops.gmp(x).data, c, atol=0)
    assert np.allclose(ops.downsample2x(x).data, c, atol=1e-15)
    assert np.allclose(ops.upsample2x(x).data, c, atol=1e-15)


def test_pool_impulse():
    x = np.zeros((1, 1, 4, 4))
    x[0, 0, 1, 2] = 1.0
    assert np.allclose(ops.gap(Tensor(x)).data, 1 / 16)
    assert np.allclose(ops.gmp(Tensor(x)).data, 1.0)


def test_downsample_requires_even():
    with pytest.raises(ShapeError):
        ops.downsample2x(Tensor(np.zeros((1, 1, 3, 4))))


def _bilinear_oracle(a):
    n, c, h, w = a.shape
    out = np.zeros((n, c, 2 * h, 2 * w))
    for i in range(2 * h):
        for j in range(2 * w):
            si, sj = (i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5
            i0, j0 = int(np.floor(si)), int(np.floor(sj))
            fi, fj = si - i0, sj - j0
            i0c, i1c = np.clip(i0, 0, h - 1), np.clip(i0 + 1, 0, h - 1)
            j0c, j1c = np.clip(j0, 0, w - 1), np.clip(j0 + 1, 0, w - 1)
            out[:, :, i, j] = (
                a[:, :, i0c, j0c] * (1 - fi) * (1 - fj)
                + a[:, :, i0c, j1c] * (1 - fi) * fj
                + a[:, :, i1c, j0c] * fi * (1 - fj)
                + a[:, :, i1c, j1c] * fi * fj
            )
    return out


def test_up_after_down_matches_kernel_oracle():
    x = rng.standard_normal((1, 2, 6, 6))
    down = x.reshape(1, 2, 3, 2, 3, 2).mean(axis=(3, 5))
    got = ops.upsample2x(ops.downsample2x(Tensor(x))).data
    assert np.abs(got - _bilinear_oracle(down)).max() <= 1e-12


def test_resample_grads():
    x = Tensor(rng.standard_normal((1, 2, 4, 4)), requires_grad=True)
    finite_diff_check(lambda: (ops.upsample2x(x) ** 2).sum(), [x], rel_tol=1e-5)
    finite_diff_check(lambda: (ops.downsample2x(x) ** 2).sum(), [x], rel_tol=1e-5)
    finite_diff_check(lambda: (ops.gmp(x) * ops.gap(x)).sum(), [x], rel_tol=1e-5)


# ---------------------------------------------------------------------------
# shuffle / padding
# ---------------------------------------------------------------------------


def test_channel_shuffle_interleaves_two_groups():
    x = np.arange(6, dtype=float).reshape(1, 6, 1, 1)
    out = ops.channel_shuffle(Tensor(x), groups=2).data.reshape(-1)
    assert np.array_equal(out, [0, 3, 1, 4, 2, 5])


def test_reflect_pad_values_and_grad():
    x = np.arange(9, dtype=float).reshape(1, 1, 3, 3)
    p = ops.reflect_pad1(Tensor(x)).data[0, 0]
    assert p[0, 0] == x[0, 0, 1, 1]  # corner mirrors without edge repeat
    assert p[0, 1] == x[0, 0, 1, 0]
    xt = Tensor(rng.standard_normal((1, 1, 3, 4)), requires_grad=True)
    finite_diff_check(lambda: (ops.reflect_pad1(xt) ** 2).sum(), [xt], rel_tol=1e-5)
