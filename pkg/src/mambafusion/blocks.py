"""Feature-extraction blocks and the dynamic fusion block.

The workhorse is ``SpatialFrequencyBlock``: one shared channel layer-norm
feeding three parallel enhancements whose outputs are summed —

- ``MixedScaleBlock``: a gated multi-scale 2D selective-scan pyramid,
- ``ChannelEnhanceBlock``: split-channel squeeze-excitation with average
  and max pooling streams plus channel shuffle,
- ``FrequencyEnhanceBlock``: FFT amplitude/phase processed by separate
  conv chains and transformed back.

Blocks stack into groups with a group-level skip, and
``DynamicFusionBlock`` blends features from the two reconstruction
branches into the fusion branch with a learned sigmoid gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fft, ops
from .layers import ChannelLinear, Conv2d, DepthwiseConv2d, LayerNormChannel
from .module import Module
from .ssm import Scan2D
from .tensor import Parameter, ShapeError, Tensor, concat, relu, sigmoid, silu, slice_


@dataclass
class SfmbConfig:
    """Geometry of one spatial-frequency block."""

    channels: int = 32
    mmb_expansion: int = 2
    scales: int = 3
    nstate: int = 8

    def __post_init__(self):
        if self.channels % 2:
            raise ValueError("channels must be even (the channel block splits them)")
        if not 1 <= self.scales <= 3:
            raise ValueError("scales must be 1, 2 or 3")


class MixedScaleBlock(Module):
    """Multi-scale selective-scan stream gated by a SiLU linear stream.

    The input is channel-expanded, refined by a depthwise conv + scan at
    up to three resolutions (coarser scales feed back through bilinear
    upsampling), multiplied with the gate stream, projected back and added
    to the input.
    """

    def __init__(self, cfg: SfmbConfig, rng: np.random.Generator):
        c = cfg.channels
        e = c * cfg.mmb_expansion
        self.scales = cfg.scales
        self.in_proj = ChannelLinear(c, e, rng)
        self.gate_proj = ChannelLinear(c, e, rng)
        self.out_proj = ChannelLinear(e, c, rng)
        self.dwconvs = [DepthwiseConv2d(e, rng) for _ in range(cfg.scales)]
        self.scans = [Scan2D(e, cfg.nstate, rng) for _ in range(cfg.scales)]
        self.norms = [LayerNormChannel(e) for _ in range(cfg.scales)]

    def __call__(self, m: Tensor) -> Tensor:
        if self.scales == 3 and (m.shape[2] % 4 or m.shape[3] % 4):
            raise ShapeError("3-scale block needs H, W divisible by 4")
        if self.scales == 2 and (m.shape[2] % 2 or m.shape[3] % 2):
            raise ShapeError("2-scale block needs even H, W")
        feats = []
        cur = self.in_proj(m)
        for i in range(self.scales):
            if i > 0:
                cur = ops.downsample2x(cur)
            cur = silu(self.dwconvs[i](cur))
            feats.append(cur)
        refined = None
        for i in reversed(range(self.scales)):
            r = self.norms[i](self.scans[i](feats[i]))
            refined = r if refined is None else r + ops.upsample2x(refined)
        gate = silu(self.gate_proj(m))
        return self.out_proj(refined * gate) + m


class ChannelEnhanceBlock(Module):
    """Dual-pool squeeze-excitation over split channels, then shuffle.

    One half of the post-conv channels is gated by statistics from global
    average pooling, the other by global max pooling; the recombined halves
    are interleaved and added to the raw input.
    """

    def __init__(self, cfg: SfmbConfig, rng: np.random.Generator):
        c = cfg.channels
        half = c // 2
        mid = max(1, half // 2)
        self.conv = Conv2d(c, c, 3, rng)
        self.avg_fc1 = ChannelLinear(half, mid, rng)
        self.avg_fc2 = ChannelLinear(mid, half, rng)
        self.max_fc1 = ChannelLinear(half, mid, rng)
        self.max_fc2 = ChannelLinear(mid, half, rng)
        self.half = half

    def __call__(self, s: Tensor) -> Tensor:
        sc = self.conv(s)
        sa = slice_(sc, (slice(None), slice(0, self.half)))
        sm = slice_(sc, (slice(None), slice(self.half, None)))
        ga = sigmoid(self.avg_fc2(relu(self.avg_fc1(ops.gap(sa)))))
        gm = sigmoid(self.max_fc2(relu(self.max_fc1(ops.gmp(sm)))))
        mixed = concat([sa * ga, sm * gm], axis=1)
        return ops.channel_shuffle(mixed, groups=2) + s


class FrequencyEnhanceBlock(Module):
    """Separate conv chains on the amplitude and phase spectra.

    Amplitude goes through two 1x1 conv + ReLU stages, phase through two
    3x3 conv + ReLU stages; the modified spectrum is inverted (real part)
    and added to the input.
    """

    def __init__(self, cfg: SfmbConfig, rng: np.random.Generator):
        c = cfg.channels
        self.amp1 = ChannelLinear(c, c, rng)
        self.amp2 = ChannelLinear(c, c, rng)
        self.phase1 = Conv2d(c, c, 3, rng)
        self.phase2 = Conv2d(c, c, 3, rng)

    def __call__(self, z: Tensor) -> Tensor:
        spec = fft.fft2(z)
        amp, phase = fft.to_amp_phase(spec)
        amp = relu(self.amp2(relu(self.amp1(amp))))
        phase = relu(self.phase2(relu(self.phase1(phase))))
        out = fft.ifft2(fft.from_amp_phase(amp, phase))
        return out + z


class SpatialFrequencyBlock(Module):
    """Shared layer-norm feeding the three enhancement blocks, summed.

    ``use_channel`` / ``use_frequency`` exist for ablation wirings; with
    both off the block degenerates to the mixed-scale stream alone.
    """

    def __init__(
        self,
        cfg: SfmbConfig,
        rng: np.random.Generator,
        use_channel: bool = True,
        use_frequency: bool = True,
    ):
        self.norm = LayerNormChannel(cfg.channels)
        self.mixed = MixedScaleBlock(cfg, rng)
        self.channel = ChannelEnhanceBlock(cfg, rng) if use_channel else None
        self.frequency = FrequencyEnhanceBlock(cfg, rng) if use_frequency else None

    def __call__(self, x: Tensor) -> Tensor:
        xb = self.norm(x)
        out = self.mixed(xb)
        if self.channel is not None:
            out = out + self.channel(xb)
        if self.frequency is not None:
            out = out + self.frequency(xb)
        return out


class BlockGroup(Module):
    """Sequential spatial-frequency blocks plus a group-level skip."""

    def __init__(self, cfg: SfmbConfig, depth: int, rng: np.random.Generator, **block_kw):
        if depth < 1:
            raise ValueError("a block group needs at least one block")
        self.blocks = [SpatialFrequencyBlock(cfg, rng, **block_kw) for _ in range(depth)]

    def __call__(self, x: Tensor) -> Tensor:
        out = x
        for blk in self.blocks:
            out = blk(out)
        return out + x


class DynamicFusionBlock(Module):
    """Gated blend of reconstruction-branch features into the fusion branch.

    Both side streams are normalized, projected, depthwise-convolved,
    scanned and re-normalized; a sigmoid gate computed from all three
    normalized inputs interpolates between them, and learnable scalars
    scale the raw side inputs back in.
    """

    def __init__(self, channels: int, nstate: int, rng: np.random.Generator):
        self.ln_v = LayerNormChannel(channels)
        self.ln_f = LayerNormChannel(channels)
        self.ln_i = LayerNormChannel(channels)
        self.v_proj = ChannelLinear(channels, channels, rng)
        self.v_dw = DepthwiseConv2d(channels, rng)
        self.v_scan = Scan2D(channels, nstate, rng)
        self.v_norm = LayerNormChannel(channels)
        self.i_proj = ChannelLinear(channels, channels, rng)
        self.i_dw = DepthwiseConv2d(channels, rng)
        self.i_scan = Scan2D(channels, nstate, rng)
        self.i_norm = LayerNormChannel(channels)
        self.w_proj = ChannelLinear(channels, channels, rng)
        self.w_dw = DepthwiseConv2d(channels, rng)
        self.out_proj = ChannelLinear(channels, channels, rng)
        self.s1 = Parameter(np.array(1.0))
        self.s2 = Parameter(np.array(1.0))

    def __call__(self, d_v: Tensor, d_f: Tensor, d_i: Tensor) -> Tensor:
        if d_v.shape != d_f.shape or d_f.shape != d_i.shape:
            raise ShapeError("fusion block inputs must share one shape")
        bv, bf, bi = self.ln_v(d_v), self.ln_f(d_f), self.ln_i(d_i)
        vp = self.v_norm(self.v_scan(silu(self.v_dw(self.v_proj(bv)))))
        ip = self.i_norm(self.i_scan(silu(self.i_dw(self.i_proj(bi)))))
        w = sigmoid(self.w_dw(self.w_proj(bv + bf + bi)))
        blended = self.out_proj(vp * w + ip * (1.0 - w))
        return blended + self.s1 * d_v + self.s2 * d_i
