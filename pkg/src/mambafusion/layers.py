"""Thin learnable-layer wrappers over the op primitives.

Weights use uniform fan-in initialization, biases start at zero,
normalization scales at one.
"""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .module import Module
from .tensor import Parameter, Tensor


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator):
        self.w = Parameter(_uniform(rng, (cout, cin, k, k), cin * k * k))
        self.b = Parameter(np.zeros(cout))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.w, self.b)


class DepthwiseConv2d(Module):
    def __init__(self, channels: int, rng: np.random.Generator, k: int = 3):
        self.w = Parameter(_uniform(rng, (channels, 1, k, k), k * k))
        self.b = Parameter(np.zeros(channels))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.depthwise_conv2d(x, self.w, self.b)


class ChannelLinear(Module):
    """Linear layer over the channel axis of NCHW maps (a 1x1 convolution)."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator):
        self.w = Parameter(_uniform(rng, (cout, cin), cin))
        self.b = Parameter(np.zeros(cout))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.channel_linear(x, self.w, self.b)


class LayerNormChannel(Module):
    """Per-position normalization over channels with learned scale/shift."""

    def __init__(self, channels: int):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta)


#: leaf parameter names treated as projection weights by zero_weights()
_PROJECTION_LEAVES = {"w", "b", "b_proj", "c_proj", "dt_proj", "dt_bias"}


def zero_weights(module: Module):
    """Zero every projection weight/bias, keeping norm scales and skips.

    Leaves layer-norm gamma at 1, the state-matrix log parameters and any
    learnable skip scales untouched, which is the configuration the
    structural identity checks are stated in.
    """
    for name, p in module.named_parameters():
        if name.split(".")[-1] in _PROJECTION_LEAVES:
            p.data[...] = 0.0
