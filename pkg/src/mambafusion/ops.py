"""Network primitives on top of the autodiff core.

Layout convention for feature maps is N x C x H x W. Convolutions are
cross-correlations (no kernel flip), 3x3 kernels keep spatial size at
stride 1 with pad=1, 1x1 kernels use pad=0.

Implementation notes: convolutions decompose into one batched GEMM per
kernel tap, which keeps everything in BLAS; backward passes re-derive
padded/normalized intermediates from the saved inputs instead of storing
copies, so retained graph memory stays close to the activations alone.
"""

from __future__ import annotations

import numpy as np

from .tensor import Function, ShapeError, Tensor

LN_EPS = 1e-6


def _pad2d(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


class _Conv2d(Function):
    """Cross-correlation as one im2col GEMM; columns rebuilt in backward."""

    def forward(self, x, w, b, stride=1, pad=None):
        if x.ndim != 4 or w.ndim != 4:
            raise ShapeError("conv2d expects NCHW input and OIKK weight")
        k = w.shape[2]
        if w.shape[2] != w.shape[3]:
            raise ShapeError("conv2d kernels must be square")
        if x.shape[1] != w.shape[1]:
            raise ShapeError(
                f"conv2d channel mismatch: input has {x.shape[1]}, weight expects {w.shape[1]}"
            )
        if pad is None:
            pad = k // 2
        self.stride, self.pad, self.k = stride, pad, k
        self.x, self.w = x, w
        self.has_bias = b is not None
        n, c, h, wd = x.shape
        oh = (h + 2 * pad - k) // stride + 1
        ow = (wd + 2 * pad - k) // stride + 1
        self.ohw = (oh, ow)
        if k == 1 and pad == 0 and stride == 1:
            out = np.matmul(w.reshape(-1, c), x.reshape(n, c, h * wd))
        else:
            cols = self._columns(x)
            out = np.matmul(w.transpose(0, 2, 3, 1).reshape(-1, k * k * c), cols)
        out = out.reshape(n, w.shape[0], oh, ow)
        if b is not None:
            out += b[None, :, None, None]
        return out

    def _columns(self, x):
        # [N, k*k*C, OH*OW] laid out tap-major to match the weight reshape
        n, c = x.shape[0], x.shape[1]
        k, stride = self.k, self.stride
        oh, ow = self.ohw
        xp = _pad2d(x, self.pad)
        cols = np.empty((n, k * k, c, oh * ow))
        for i in range(k):
            for j in range(k):
                sl = xp[
                    :, :, i : i + (oh - 1) * stride + 1 : stride, j : j + (ow - 1) * stride + 1 : stride
                ]
                cols[:, i * k + j] = sl.reshape(n, c, oh * ow)
        return cols.reshape(n, k * k * c, oh * ow)

    def backward(self, g):
        x, w = self.x, self.w
        k, stride, pad = self.k, self.stride, self.pad
        n, c, h, wd = x.shape
        o = w.shape[0]
        oh, ow = self.ohw
        g2 = g.reshape(n, o, oh * ow)
        gb = g.sum(axis=(0, 2, 3)) if self.has_bias else None
        if k == 1 and pad == 0 and stride == 1:
            gx = np.matmul(w.reshape(o, c).T, g2).reshape(x.shape)
            gw = np.matmul(g2, x.reshape(n, c, h * wd).transpose(0, 2, 1)).sum(axis=0)
            return gx, gw.reshape(w.shape), gb
        cols = self._columns(x)
        gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
        gw = gw.reshape(o, k, k, c).transpose(0, 3, 1, 2)
        wr = w.transpose(0, 2, 3, 1).reshape(o, k * k * c)
        gcols = np.matmul(wr.T, g2).reshape(n, k * k, c, oh, ow)
        gxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
        for i in range(k):
            for j in range(k):
                gxp[
                    :, :, i : i + (oh - 1) * stride + 1 : stride, j : j + (ow - 1) * stride + 1 : stride
                ] += gcols[:, i * k + j]
        gx = gxp[:, :, pad : pad + h, pad : pad + wd] if pad else gxp
        return np.ascontiguousarray(gx), np.ascontiguousarray(gw), gb

    def release(self):
        self.x = self.w = None


class _DepthwiseConv2d(Function):
    """Per-channel 3x3 (or kxk) conv as k*k shifted broadcast multiplies."""

    def forward(self, x, w, b):
        if w.ndim != 4 or w.shape[1] != 1:
            raise ShapeError("depthwise weight must be [C,1,k,k]")
        if x.shape[1] != w.shape[0]:
            raise ShapeError(
                f"depthwise channel mismatch: input has {x.shape[1]}, weight has {w.shape[0]}"
            )
        k = w.shape[2]
        pad = k // 2
        self.x, self.w, self.k = x, w, k
        self.has_bias = b is not None
        n, c, h, wd = x.shape
        xp = _pad2d(x, pad)
        out = np.zeros_like(x)
        for i in range(k):
            for j in range(k):
                out += xp[:, :, i : i + h, j : j + wd] * w[None, :, 0, i, j, None, None]
        if b is not None:
            out += b[None, :, None, None]
        return out

    def backward(self, g):
        x, w, k = self.x, self.w, self.k
        pad = k // 2
        n, c, h, wd = x.shape
        xp = _pad2d(x, pad)
        gxp = np.zeros_like(xp)
        gw = np.empty_like(w)
        for i in range(k):
            for j in range(k):
                win = xp[:, :, i : i + h, j : j + wd]
                gw[:, 0, i, j] = (win * g).sum(axis=(0, 2, 3))
                gxp[:, :, i : i + h, j : j + wd] += g * w[None, :, 0, i, j, None, None]
        gx = gxp[:, :, pad : pad + h, pad : pad + wd] if pad else gxp
        gb = g.sum(axis=(0, 2, 3)) if self.has_bias else None
        return np.ascontiguousarray(gx), gw, gb

    def release(self):
        self.x = self.w = None


class _Linear(Function):
    """Affine map over the trailing axis: y[..., o] = sum_i x[..., i] w[o, i] + b[o]."""

    def forward(self, x, w, b):
        if x.shape[-1] != w.shape[1]:
            raise ShapeError(
                f"linear trailing-dim mismatch: input has {x.shape[-1]}, weight expects {w.shape[1]}"
            )
        self.x, self.w = x, w
        out = x @ w.T
        if b is not None:
            out = out + b
        self.has_bias = b is not None
        return out

    def backward(self, g):
        gx = g @ self.w
        gw = np.tensordot(g, self.x, axes=(range(g.ndim - 1), range(g.ndim - 1)))
        gb = g.sum(axis=tuple(range(g.ndim - 1))) if self.has_bias else None
        return gx, gw, gb

    def release(self):
        self.x = self.w = None


class _ChannelLinear(Function):
    """1x1-convolution view of a linear layer on NCHW maps (batched GEMM)."""

    def forward(self, x, w, b):
        if x.shape[1] != w.shape[1]:
            raise ShapeError(
                f"channel mismatch: input has {x.shape[1]} channels, weight expects {w.shape[1]}"
            )
        self.x, self.w = x, w
        n, c, h, wd = x.shape
        out = np.matmul(w, x.reshape(n, c, h * wd)).reshape(n, w.shape[0], h, wd)
        if b is not None:
            out += b[None, :, None, None]
        self.has_bias = b is not None
        return out

    def backward(self, g):
        x, w = self.x, self.w
        n, c, h, wd = x.shape
        o = w.shape[0]
        g2 = g.reshape(n, o, h * wd)
        gx = np.matmul(w.T, g2).reshape(x.shape)
        gw = np.matmul(g2, x.reshape(n, c, h * wd).transpose(0, 2, 1)).sum(axis=0)
        gb = g.sum(axis=(0, 2, 3)) if self.has_bias else None
        return gx, gw, gb

    def release(self):
        self.x = self.w = None


class _LayerNorm(Function):
    """Normalize across channels independently at each spatial position."""

    def forward(self, x, gamma, beta, eps=LN_EPS):
        if x.ndim != 4:
            raise ShapeError("layer_norm expects an NCHW tensor")
        if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
            raise ShapeError("layer_norm gamma/beta must be per-channel vectors")
        mu = x.mean(axis=1, keepdims=True)
        xc = x - mu
        var = np.mean(xc * xc, axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        # save the small per-position stats, re-derive xhat in backward
        self.x, self.mu, self.inv, self.gamma = x, mu, inv, gamma
        return gamma[None, :, None, None] * (xc * inv) + beta[None, :, None, None]

    def backward(self, g):
        x, mu, inv, gamma = self.x, self.mu, self.inv, self.gamma
        xhat = (x - mu) * inv
        gxhat = g * gamma[None, :, None, None]
        m1 = gxhat.mean(axis=1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=1, keepdims=True)
        gx = inv * (gxhat - m1 - xhat * m2)
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        return gx, ggamma, gbeta

    def release(self):
        self.x = self.mu = self.inv = self.gamma = None


class _Gap(Function):
    def forward(self, x):
        self.shape = x.shape
        return x.mean(axis=(2, 3), keepdims=True)

    def backward(self, g):
        n, c, h, w = self.shape
        return (np.broadcast_to(g / (h * w), self.shape).copy(),)


class _Gmp(Function):
    def forward(self, x):
        self.x = x
        out = x.max(axis=(2, 3), keepdims=True)
        self.out = out
        return out

    def backward(self, g):
        # spread over ties to keep the op symmetric on plateaus
        mask = self.x == self.out
        counts = mask.sum(axis=(2, 3), keepdims=True)
        return (mask * (g / counts),)

    def release(self):
        self.x = self.out = None


class _Downsample2x(Function):
    """2x2 mean pooling with stride 2."""

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"downsample2x needs even extents, got {h}x{w}")
        self.shape = x.shape
        return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(self, g):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        return (gx,)


def _up2_axis(x: np.ndarray, axis: int) -> np.ndarray:
    """Double one spatial axis bilinearly (half-pixel centers, clamped).

    Output sample 2m sits a quarter pixel before input sample m, 2m+1 a
    quarter pixel after, so the weights are (1/4, 3/4) against the
    previous/next input sample, with clamped borders.
    """
    x = np.moveaxis(x, axis, -1)
    prev = np.concatenate([x[..., :1], x[..., :-1]], axis=-1)
    nxt = np.concatenate([x[..., 1:], x[..., -1:]], axis=-1)
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],))
    out[..., 0::2] = 0.25 * prev + 0.75 * x
    out[..., 1::2] = 0.75 * x + 0.25 * nxt
    return np.moveaxis(out, -1, axis)


def _up2_axis_adjoint(g: np.ndarray, axis: int) -> np.ndarray:
    g = np.moveaxis(g, axis, -1)
    ge = g[..., 0::2]
    go = g[..., 1::2]
    gx = 0.75 * ge + 0.75 * go
    # prev-neighbor term: out[2m] takes 0.25 from x[m-1] (clamped at 0)
    gx[..., :-1] += 0.25 * ge[..., 1:]
    gx[..., 0] += 0.25 * ge[..., 0]
    # next-neighbor term: out[2m+1] takes 0.25 from x[m+1] (clamped at end)
    gx[..., 1:] += 0.25 * go[..., :-1]
    gx[..., -1] += 0.25 * go[..., -1]
    return np.moveaxis(gx, -1, axis)


class _Upsample2x(Function):
    """Bilinear 2x upsampling, corner alignment off (separable)."""

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError("upsample2x expects an NCHW tensor")
        return _up2_axis(_up2_axis(x, 2), 3)

    def backward(self, g):
        return (_up2_axis_adjoint(_up2_axis_adjoint(g, 3), 2),)


class _ReflectPad1(Function):
    """Reflect-pad H and W by one pixel (no edge repetition)."""

    def forward(self, x):
        if x.shape[2] < 2 or x.shape[3] < 2:
            raise ShapeError("reflect padding needs spatial extents >= 2")
        return np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="reflect")

    def backward(self, g):
        gx = g[:, :, 1:-1, 1:-1].copy()
        gx[:, :, 1, :] += g[:, :, 0, 1:-1]
        gx[:, :, -2, :] += g[:, :, -1, 1:-1]
        gx[:, :, :, 1] += g[:, :, 1:-1, 0]
        gx[:, :, :, -2] += g[:, :, 1:-1, -1]
        gx[:, :, 1, 1] += g[:, :, 0, 0]
        gx[:, :, 1, -2] += g[:, :, 0, -1]
        gx[:, :, -2, 1] += g[:, :, -1, 0]
        gx[:, :, -2, -2] += g[:, :, -1, -1]
        return (gx,)


class _ChannelShuffle(Function):
    """Interleave channel groups: [g0c0, g1c0, g0c1, g1c1, ...]."""

    def forward(self, x, groups):
        n, c, h, w = x.shape
        if c % groups:
            raise ShapeError("channel count not divisible by shuffle groups")
        self.groups = groups
        return np.ascontiguousarray(
            x.reshape(n, groups, c // groups, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)
        )

    def backward(self, g):
        n, c, h, w = g.shape
        groups = self.groups
        gx = g.reshape(n, c // groups, groups, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)
        return (np.ascontiguousarray(gx),)


# ---------------------------------------------------------------------------
# public wrappers
# ---------------------------------------------------------------------------


def conv2d(x, w, b=None, stride: int = 1, pad: int | None = None) -> Tensor:
    return _Conv2d.apply(x, w, b, stride=stride, pad=pad)


def depthwise_conv2d(x, w, b=None) -> Tensor:
    return _DepthwiseConv2d.apply(x, w, b)


def linear(x, w, b=None) -> Tensor:
    return _Linear.apply(x, w, b)


def channel_linear(x, w, b=None) -> Tensor:
    return _ChannelLinear.apply(x, w, b)


def layer_norm(x, gamma, beta, eps: float = LN_EPS) -> Tensor:
    return _LayerNorm.apply(x, gamma, beta, eps=eps)


def gap(x) -> Tensor:
    return _Gap.apply(x)


def gmp(x) -> Tensor:
    return _Gmp.apply(x)


def downsample2x(x) -> Tensor:
    return _Downsample2x.apply(x)


def upsample2x(x) -> Tensor:
    return _Upsample2x.apply(x)


def reflect_pad1(x) -> Tensor:
    return _ReflectPad1.apply(x)


def channel_shuffle(x, groups: int = 2) -> Tensor:
    return _ChannelShuffle.apply(x, groups=groups)
