"""Selective state-space machinery.

A per-channel diagonal linear recurrence

    h_t = abar_t * h_{t-1} + bbar_t * x_t,   y_t = C_t . h_t

with zero-order-hold discretization (abar = exp(d A), bbar = expm1(d A)/A)
and input-dependent B_t, C_t and step size d_t (softplus-positive), i.e. a
selective scan. The 2D variant flattens a feature map along four
directions (row/column major, forward/reverse), scans each with its own
parameter set and sums the un-flattened results.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .module import Module
from .scan_kernels import scan_backward, scan_forward
from .tensor import Function, Parameter, ShapeError, Tensor, concat, exp, grad_enabled, neg, reshape

SCAN_SEGMENT = 64  # backward recomputes hidden states in chunks this long


class ScanDirection(enum.Enum):
    """Flatten order (row or column major) plus a reversal flag."""

    LEFT_RIGHT = (False, False)
    TOP_DOWN = (True, False)
    RIGHT_LEFT = (False, True)
    BOTTOM_UP = (True, True)

    @property
    def column_major(self) -> bool:
        return self.value[0]

    @property
    def reversed(self) -> bool:
        return self.value[1]


#: packing order used by ss2d; index k in packed arrays follows this.
DIRECTIONS = (
    ScanDirection.LEFT_RIGHT,
    ScanDirection.TOP_DOWN,
    ScanDirection.RIGHT_LEFT,
    ScanDirection.BOTTOM_UP,
)


def discretize(A: np.ndarray, B_t: np.ndarray, delta_t: np.ndarray):
    """Zero-order-hold discretization of diagonal state dynamics.

    A, B_t: [C, N];  delta_t: [C].  Returns (abar, bbar), both [C, N].
    The expm1 form keeps bbar -> delta * B exact as A -> 0.
    """
    A = np.asarray(A, dtype=np.float64)
    B_t = np.asarray(B_t, dtype=np.float64)
    d = np.asarray(delta_t, dtype=np.float64)[:, None]
    e = np.expm1(d * A)
    return e + 1.0, (e / A) * B_t


class SsmParams(Module):
    """Learned parameters of one scan direction.

    The state matrix is log-parameterized (A = -exp(a_log)) so it stays
    strictly negative; b/c projections map the channel vector at each
    position to the shared N-dimensional input/output couplings; the
    delta projection plus bias feeds a softplus to produce the positive
    per-channel step size.
    """

    def __init__(self, channels: int, nstate: int, rng: np.random.Generator):
        self.a_log = Parameter(np.log(np.tile(np.arange(1.0, nstate + 1.0), (channels, 1))))
        bound = 1.0 / math.sqrt(channels)
        self.b_proj = Parameter(rng.uniform(-bound, bound, size=(nstate, channels)))
        self.c_proj = Parameter(rng.uniform(-bound, bound, size=(nstate, channels)))
        self.dt_proj = Parameter(rng.uniform(-bound, bound, size=(channels, channels)))
        dt = np.exp(rng.uniform(math.log(0.01), math.log(0.1), size=channels))
        self.dt_bias = Parameter(np.log(np.expm1(dt)))
        self.channels = channels
        self.nstate = nstate

    def state_matrix(self) -> Tensor:
        """A = -exp(a_log), strictly negative, shape [C, N]."""
        return neg(exp(self.a_log))


class _SelectiveScan(Function):
    """Fused recurrence over packed directions.

    inputs: xs [B,K,C,L], dts_raw [B,K,C,L] (pre-softplus), A [K,C,N],
    Bs [B,K,N,L], Cs [B,K,N,L]; output y [B,K,C,L].
    """

    def forward(self, xs, dts, A, Bs, Cs):
        save = grad_enabled()
        y, hcp = scan_forward(xs, dts, A, Bs, Cs, SCAN_SEGMENT, True, save)
        if save:
            self.saved = (xs, dts, A, Bs, Cs, hcp)
        return y

    def backward(self, gy):
        xs, dts, A, Bs, Cs, hcp = self.saved
        return scan_backward(xs, dts, A, Bs, Cs, hcp, gy, SCAN_SEGMENT, True)

    def release(self):
        self.saved = None


class _ProjBC(Function):
    """Per-direction position-wise projection: [B,K,C,L] x [K,N,C] -> [B,K,N,L]."""

    def forward(self, xs, w):
        self.xs, self.w = xs, w
        return np.matmul(w[None], xs)

    def backward(self, g):
        gxs = np.matmul(self.w.transpose(0, 2, 1)[None], g)
        gw = np.matmul(g, self.xs.transpose(0, 1, 3, 2)).sum(axis=0)
        return gxs, gw

    def release(self):
        self.xs = self.w = None


class _ProjDelta(Function):
    """Raw step-size projection with per-channel bias: -> [B,K,C,L]."""

    def forward(self, xs, w, bias):
        self.xs, self.w = xs, w
        out = np.matmul(w[None], xs)
        out += bias[None, :, :, None]
        return out

    def backward(self, g):
        gxs = np.matmul(self.w.transpose(0, 2, 1)[None], g)
        gw = np.matmul(g, self.xs.transpose(0, 1, 3, 2)).sum(axis=0)
        gbias = g.sum(axis=(0, 3))
        return gxs, gw, gbias

    def release(self):
        self.xs = self.w = None


class _PackDirections(Function):
    """[B,C,H,W] -> [B,4,C,H*W] sequences in DIRECTIONS order."""

    def forward(self, x):
        b, c, h, w = x.shape
        self.hw = (h, w)
        row = x.reshape(b, c, h * w)
        col = np.ascontiguousarray(x.transpose(0, 1, 3, 2)).reshape(b, c, h * w)
        out = np.empty((b, 4, c, h * w))
        out[:, 0] = row
        out[:, 1] = col
        out[:, 2] = row[:, :, ::-1]
        out[:, 3] = col[:, :, ::-1]
        return out

    def backward(self, g):
        h, w = self.hw
        b, _, c, L = g.shape
        row = g[:, 0] + g[:, 2, :, ::-1]
        col = g[:, 1] + g[:, 3, :, ::-1]
        gx = row.reshape(b, c, h, w) + col.reshape(b, c, w, h).transpose(0, 1, 3, 2)
        return (np.ascontiguousarray(gx),)


class _UnpackDirections(Function):
    """Sum of the four direction outputs folded back to [B,C,H,W]."""

    def forward(self, ys, hw):
        h, w = hw
        self.hw = hw
        b, _, c, L = ys.shape
        row = ys[:, 0] + ys[:, 2, :, ::-1]
        col = ys[:, 1] + ys[:, 3, :, ::-1]
        out = row.reshape(b, c, h, w) + col.reshape(b, c, w, h).transpose(0, 1, 3, 2)
        return np.ascontiguousarray(out)

    def backward(self, g):
        h, w = self.hw
        b, c = g.shape[0], g.shape[1]
        row = g.reshape(b, c, h * w)
        col = np.ascontiguousarray(g.transpose(0, 1, 3, 2)).reshape(b, c, h * w)
        gys = np.empty((b, 4, c, h * w))
        gys[:, 0] = row
        gys[:, 1] = col
        gys[:, 2] = row[:, :, ::-1]
        gys[:, 3] = col[:, :, ::-1]
        return (gys,)


def _packed_params(params: "list[SsmParams] | tuple[SsmParams, ...]"):
    c, n = params[0].channels, params[0].nstate
    A = concat([reshape(p.state_matrix(), (1, c, n)) for p in params], axis=0)
    wb = concat([reshape(p.b_proj, (1, n, c)) for p in params], axis=0)
    wc = concat([reshape(p.c_proj, (1, n, c)) for p in params], axis=0)
    wd = concat([reshape(p.dt_proj, (1, c, c)) for p in params], axis=0)
    bias = concat([reshape(p.dt_bias, (1, c)) for p in params], axis=0)
    return A, wb, wc, wd, bias


def _run_packed(xs: Tensor, params) -> Tensor:
    A, wb, wc, wd, bias = _packed_params(params)
    bs = _ProjBC.apply(xs, wb)
    cs = _ProjBC.apply(xs, wc)
    dts = _ProjDelta.apply(xs, wd, bias)
    return _SelectiveScan.apply(xs, dts, A, bs, cs)


def selective_scan(x: Tensor, params: SsmParams) -> Tensor:
    """Scan a [C, L] sequence left to right with input-dependent dynamics."""
    if x.ndim != 2:
        raise ShapeError("selective_scan expects a [C, L] sequence")
    c, L = x.shape
    xs = reshape(x, (1, 1, c, L))
    y = _run_packed(xs, [params])
    return reshape(y, (c, L))


def ss2d(x: Tensor, params) -> Tensor:
    """Four-direction 2D selective scan over an NCHW map; results summed."""
    if x.ndim != 4:
        raise ShapeError("ss2d expects an NCHW tensor")
    if len(params) != 4:
        raise ValueError("ss2d needs one parameter set per scan direction")
    h, w = x.shape[2], x.shape[3]
    xs = _PackDirections.apply(x)
    ys = _run_packed(xs, params)
    return _UnpackDirections.apply(ys, hw=(h, w))


class Scan2D(Module):
    """Bundle of four per-direction parameter sets for ss2d."""

    def __init__(self, channels: int, nstate: int, rng: np.random.Generator):
        self.directions = [SsmParams(channels, nstate, rng) for _ in DIRECTIONS]

    def __call__(self, x: Tensor) -> Tensor:
        return ss2d(x, self.directions)
