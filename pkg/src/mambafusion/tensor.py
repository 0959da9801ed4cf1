"""Dense float64 tensor with define-by-run reverse-mode autodiff.

Every value flowing through the network is a ``Tensor`` wrapping a
``np.float64`` ndarray. Operations build an implicit tape: each result
remembers the ``Function`` that produced it, and ``backward()`` replays
the recorded functions once, in reverse topological order.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    """N-dimensional float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "creator", "_out_index")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.creator: "Function" | None = None
        self._out_index = 0

    # ---- basic introspection -------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def is_leaf(self) -> bool:
        return self.creator is None

    def zero_grad(self):
        self.grad = None

    def assert_finite(self, what: str = "tensor"):
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values in {what}")
        return self

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # ---- operators -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Parameter(Tensor):
    """A leaf tensor registered as learnable by the module system."""

    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


# ---------------------------------------------------------------------------
# Function machinery
# ---------------------------------------------------------------------------


class Function:
    """One recorded operation: holds inputs, outputs and saved buffers.

    Subclasses implement ``forward(*arrays) -> array | tuple`` and
    ``backward(*output_grads) -> tuple`` on raw ndarrays, stashing on
    ``self`` whatever the backward pass needs.
    """

    def __init__(self):
        self.inputs: tuple[Tensor, ...] = ()
        self.outputs: tuple[Tensor, ...] = ()

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError

    def backward(self, *grads):
        raise NotImplementedError

    def release(self):  # free saved buffers once consumed
        pass

    @classmethod
    def apply(cls, *tensors, **kwargs):
        ts = tuple(None if t is None else as_tensor(t) for t in tensors)
        fn = cls()
        out_data = fn.forward(*(None if t is None else t.data for t in ts), **kwargs)
        multi = isinstance(out_data, tuple)
        arrays = out_data if multi else (out_data,)
        needs = _GRAD_ENABLED and any(t is not None and t.requires_grad for t in ts)
        outs = []
        for i, arr in enumerate(arrays):
            o = Tensor(arr, requires_grad=needs)
            if needs:
                o.creator = fn
                o._out_index = i
            outs.append(o)
        if needs:
            fn.inputs = ts
            fn.outputs = tuple(outs)
        return tuple(outs) if multi else outs[0]


def backward(loss: Tensor):
    """Populate ``grad`` on every requires-grad leaf reachable from loss.

    The graph is single-shot: saved buffers are released as soon as each
    function has propagated, so call it once per forward pass.
    """
    if loss.size != 1:
        raise ValueError("backward() requires a scalar loss tensor")
    if loss.creator is None:
        if loss.requires_grad:
            g = np.ones_like(loss.data)
            loss.grad = g if loss.grad is None else loss.grad + g
        return

    topo: list[Function] = []
    seen: set[int] = set()
    stack: list[tuple[Function, bool]] = [(loss.creator, False)]
    while stack:
        fn, processed = stack.pop()
        if processed:
            topo.append(fn)
            continue
        if id(fn) in seen:
            continue
        seen.add(id(fn))
        stack.append((fn, True))
        for t in fn.inputs:
            if t is not None and t.creator is not None and id(t.creator) not in seen:
                stack.append((t.creator, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for fn in reversed(topo):
        gouts = []
        pending = False
        for o in fn.outputs:
            g = grads.pop(id(o), None)
            if g is None:
                g = np.zeros_like(o.data)
            else:
                pending = True
            gouts.append(g)
        if pending:
            gins = fn.backward(*gouts)
            if not isinstance(gins, tuple):
                gins = (gins,)
            for t, g in zip(fn.inputs, gins):
                if t is None or g is None:
                    continue
                if t.creator is None:
                    if t.requires_grad:
                        t.grad = g if t.grad is None else t.grad + g
                elif id(t) in grads:
                    grads[id(t)] = grads[id(t)] + g
                else:
                    grads[id(t)] = g
        fn.release()
        # break tensor<->function cycles so plain refcounting frees the
        # graph (and its arrays) as soon as callers drop their tensors
        for o in fn.outputs:
            o.creator = None
        fn.inputs = ()
        fn.outputs = ()


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


class _Add(Function):
    def forward(self, a, b):
        self.sa, self.sb = a.shape, b.shape
        return a + b

    def backward(self, g):
        return _unbroadcast(g, self.sa), _unbroadcast(g, self.sb)


class _Sub(Function):
    def forward(self, a, b):
        self.sa, self.sb = a.shape, b.shape
        return a - b

    def backward(self, g):
        return _unbroadcast(g, self.sa), _unbroadcast(-g, self.sb)


class _Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, g):
        ga = _unbroadcast(g * self.b, self.a.shape)
        gb = _unbroadcast(g * self.a, self.b.shape)
        return ga, gb

    def release(self):
        self.a = self.b = None


class _Div(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, g):
        ga = _unbroadcast(g / self.b, self.a.shape)
        gb = _unbroadcast(-g * self.a / (self.b * self.b), self.b.shape)
        return ga, gb

    def release(self):
        self.a = self.b = None


class _Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, g):
        return (-g,)


class _Pow(Function):
    def forward(self, a, p):
        self.a, self.p = a, p
        return a**p

    def backward(self, g):
        return (g * self.p * self.a ** (self.p - 1),)

    def release(self):
        self.a = None


class _Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, g):
        return (g * self.out,)

    def release(self):
        self.out = None


class _Log(Function):
    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, g):
        return (g / self.a,)

    def release(self):
        self.a = None


class _Sqrt(Function):
    def forward(self, a):
        self.out = np.sqrt(a)
        return self.out

    def backward(self, g):
        return (g * 0.5 / self.out,)

    def release(self):
        self.out = None


class _Abs(Function):
    def forward(self, a):
        self.sign = np.sign(a)
        return np.abs(a)

    def backward(self, g):
        return (g * self.sign,)

    def release(self):
        self.sign = None


class _Maximum(Function):
    # ties split the gradient evenly so max(a, b) stays argument-symmetric
    def forward(self, a, b):
        self.sa, self.sb = a.shape, b.shape
        self.wa = np.where(a > b, 1.0, np.where(a == b, 0.5, 0.0))
        return np.maximum(a, b)

    def backward(self, g):
        ga = _unbroadcast(g * self.wa, self.sa)
        gb = _unbroadcast(g * (1.0 - self.wa), self.sb)
        return ga, gb

    def release(self):
        self.wa = None


class _Sigmoid(Function):
    def forward(self, a):
        out = np.empty_like(a)
        pos = a >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
        e = np.exp(a[~pos])
        out[~pos] = e / (1.0 + e)
        self.out = out
        return out

    def backward(self, g):
        return (g * self.out * (1.0 - self.out),)

    def release(self):
        self.out = None


class _Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return np.where(self.mask, a, 0.0)

    def backward(self, g):
        return (g * self.mask,)

    def release(self):
        self.mask = None


class _Silu(Function):
    def forward(self, a):
        self.a = a  # sigmoid re-derived in backward to keep saves lean
        return a * _stable_sigmoid(a)

    def backward(self, g):
        s = _stable_sigmoid(self.a)
        return (g * (s + self.a * s * (1.0 - s)),)

    def release(self):
        self.a = None


class _Softplus(Function):
    def forward(self, a):
        self.sig = _stable_sigmoid(a)
        return _softplus_np(a)

    def backward(self, g):
        return (g * self.sig,)

    def release(self):
        self.sig = None


class _Cos(Function):
    def forward(self, a):
        self.a = a
        return np.cos(a)

    def backward(self, g):
        return (-g * np.sin(self.a),)

    def release(self):
        self.a = None


class _Sin(Function):
    def forward(self, a):
        self.a = a
        return np.sin(a)

    def backward(self, g):
        return (g * np.cos(self.a),)

    def release(self):
        self.a = None


def _stable_sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus_np(a: np.ndarray) -> np.ndarray:
    # log(1 + e^a), linear for large a to avoid overflow
    out = np.where(a > 30.0, a, np.log1p(np.exp(np.minimum(a, 30.0))))
    return out


# ---------------------------------------------------------------------------
# Reductions and shape ops
# ---------------------------------------------------------------------------


class _Sum(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape = a.shape
        self.axis, self.keepdims = axis, keepdims
        return np.sum(a, axis=axis, keepdims=keepdims)

    def backward(self, g):
        if self.axis is None:
            return (np.broadcast_to(g, self.shape).copy(),)
        if not self.keepdims:
            axis = self.axis if isinstance(self.axis, tuple) else (self.axis,)
            axis = tuple(a % len(self.shape) for a in axis)
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, self.shape).copy(),)


class _Mean(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape = a.shape
        self.axis, self.keepdims = axis, keepdims
        out = np.mean(a, axis=axis, keepdims=keepdims)
        self.count = a.size / out.size
        return out

    def backward(self, g):
        if self.axis is not None and not self.keepdims:
            axis = self.axis if isinstance(self.axis, tuple) else (self.axis,)
            axis = tuple(a % len(self.shape) for a in axis)
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / self.count, self.shape).copy(),)


class _Reshape(Function):
    def forward(self, a, shape):
        self.shape = a.shape
        return np.reshape(a, shape)

    def backward(self, g):
        return (np.reshape(g, self.shape),)


class _Transpose(Function):
    def forward(self, a, axes):
        self.axes = axes
        return np.ascontiguousarray(np.transpose(a, axes))

    def backward(self, g):
        inv = np.argsort(self.axes)
        return (np.ascontiguousarray(np.transpose(g, inv)),)


class _Flip(Function):
    def forward(self, a, axis):
        self.axis = axis
        return np.ascontiguousarray(np.flip(a, axis=axis))

    def backward(self, g):
        return (np.ascontiguousarray(np.flip(g, axis=self.axis)),)


class _Concat(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, self.splits, axis=self.axis))


class _Slice(Function):
    def forward(self, a, index):
        self.shape = a.shape
        self.index = index
        return np.ascontiguousarray(a[index])

    def backward(self, g):
        out = np.zeros(self.shape)
        out[self.index] = g
        return (out,)


# ---------------------------------------------------------------------------
# Public op surface
# ---------------------------------------------------------------------------


def add(a, b):
    return _Add.apply(a, b)


def sub(a, b):
    return _Sub.apply(a, b)


def mul(a, b):
    return _Mul.apply(a, b)


def div(a, b):
    return _Div.apply(a, b)


def neg(a):
    return _Neg.apply(a)


def power(a, p: float):
    return _Pow.apply(a, p=float(p))


def exp(a):
    return _Exp.apply(a)


def log(a):
    return _Log.apply(a)


def sqrt(a):
    return _Sqrt.apply(a)


def absolute(a):
    return _Abs.apply(a)


def maximum(a, b):
    return _Maximum.apply(a, b)


def sigmoid(a):
    return _Sigmoid.apply(a)


def relu(a):
    return _Relu.apply(a)


def silu(a):
    return _Silu.apply(a)


def softplus(a):
    return _Softplus.apply(a)


def cos(a):
    return _Cos.apply(a)


def sin(a):
    return _Sin.apply(a)


def tsum(a, axis=None, keepdims=False):
    return _Sum.apply(a, axis=axis, keepdims=keepdims)


def tmean(a, axis=None, keepdims=False):
    return _Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a, shape):
    return _Reshape.apply(a, shape=tuple(shape))


def transpose(a, axes):
    return _Transpose.apply(a, axes=tuple(axes))


def flip(a, axis):
    return _Flip.apply(a, axis=axis)


def concat(tensors, axis=0):
    return _Concat.apply(*tensors, axis=axis)


def slice_(a, index):
    return _Slice.apply(a, index=index)
