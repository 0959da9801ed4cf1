"""The three-branch fusion network.

Two reconstruction branches (visible, infrared) run first and expose their
per-stage group outputs; the fusion branch alternates block groups with
dynamic fusion blocks that consume the matching stage features. All three
branches own independent weights. Heads predict residual images for the
reconstruction branches (output = head + input); the fusion head maps the
skip-connected features straight to the fused image.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .blocks import BlockGroup, DynamicFusionBlock, SfmbConfig
from .layers import ChannelLinear, Conv2d
from .module import Module
from .tensor import ShapeError, Tensor, concat


@dataclass
class ModelConfig:
    groups: int = 3
    blocks_per_group: int = 2
    channels: int = 32
    nstate: int = 8
    mmb_expansion: int = 2
    scales: int = 3
    input_size: int = 128
    seed: int = 0
    # ablation wirings (defaults are the full model)
    use_channel_block: bool = True
    use_frequency_block: bool = True
    use_ir_heads: bool = True
    fusion_mode: str = "gated"  # or "add" / "concat"

    def __post_init__(self):
        if self.groups < 1:
            raise ValueError("need at least one block group")
        if self.channels % 2:
            raise ValueError("channels must be even")
        if self.fusion_mode not in ("gated", "add", "concat"):
            raise ValueError(f"unknown fusion_mode {self.fusion_mode!r}")

    def block_config(self) -> SfmbConfig:
        return SfmbConfig(
            channels=self.channels,
            mmb_expansion=self.mmb_expansion,
            scales=self.scales,
            nstate=self.nstate,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class AddFusion(Module):
    """Ablation stand-in for the gated fusion block: plain sum."""

    def __call__(self, d_v, d_f, d_i):
        return d_v + d_f + d_i


class ConcatFusion(Module):
    """Ablation stand-in: concatenate the three streams, 1x1-reduce."""

    def __init__(self, channels: int, rng: np.random.Generator):
        self.reduce = ChannelLinear(3 * channels, channels, rng)

    def __call__(self, d_v, d_f, d_i):
        return self.reduce(concat([d_v, d_f, d_i], axis=1))


class ReconstructionBranch(Module):
    """Stem convs, stacked block groups, optional residual head."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator, with_head: bool):
        c = cfg.channels
        bc = cfg.block_config()
        kw = dict(use_channel=cfg.use_channel_block, use_frequency=cfg.use_frequency_block)
        self.stem1 = Conv2d(1, c, 3, rng)
        self.stem2 = Conv2d(c, c, 3, rng)
        self.groups = [BlockGroup(bc, cfg.blocks_per_group, rng, **kw) for _ in range(cfg.groups)]
        if with_head:
            self.head1 = Conv2d(c, c, 3, rng)
            self.head2 = Conv2d(c, 1, 3, rng)
        self.with_head = with_head

    def __call__(self, x: Tensor):
        """Returns (reconstruction or None, per-stage features)."""
        f0 = self.stem2(self.stem1(x))
        feats = []
        f = f0
        for g in self.groups:
            f = g(f)
            feats.append(f)
        if not self.with_head:
            return None, feats
        recon = self.head2(self.head1(f + f0)) + x
        return recon, feats


class FusionModel(Module):
    """Fusion branch plus the two reconstruction branches feeding it."""

    def __init__(self, cfg: ModelConfig):
        rng = np.random.default_rng(cfg.seed)
        c = cfg.channels
        bc = cfg.block_config()
        kw = dict(use_channel=cfg.use_channel_block, use_frequency=cfg.use_frequency_block)
        self.visible = ReconstructionBranch(cfg, rng, with_head=cfg.use_ir_heads)
        self.infrared = ReconstructionBranch(cfg, rng, with_head=cfg.use_ir_heads)
        self.stem_v = Conv2d(1, c, 3, rng)
        self.stem_i = Conv2d(1, c, 3, rng)
        self.stem_reduce = ChannelLinear(2 * c, c, rng)
        self.groups = [BlockGroup(bc, cfg.blocks_per_group, rng, **kw) for _ in range(cfg.groups)]
        if cfg.fusion_mode == "gated":
            self.fusers = [DynamicFusionBlock(c, cfg.nstate, rng) for _ in range(cfg.groups)]
        elif cfg.fusion_mode == "add":
            self.fusers = [AddFusion() for _ in range(cfg.groups)]
        else:
            self.fusers = [ConcatFusion(c, rng) for _ in range(cfg.groups)]
        self.head1 = Conv2d(c, c, 3, rng)
        self.head2 = Conv2d(c, 1, 3, rng)
        self.config = cfg

    # -- validation --------------------------------------------------------
    def _check_inputs(self, vis: Tensor, ir: Tensor):
        if vis.shape != ir.shape:
            raise ShapeError(f"input shapes differ: {vis.shape} vs {ir.shape}")
        if vis.ndim != 4 or vis.shape[1] != 1:
            raise ShapeError("inputs must be [N, 1, H, W] luminance maps")
        h, w = vis.shape[2], vis.shape[3]
        if self.config.scales == 3 and (h % 4 or w % 4):
            raise ShapeError(f"spatial extents must be divisible by 4, got {h}x{w}")

    # -- forward passes ----------------------------------------------------
    def forward_all(self, vis: Tensor, ir: Tensor):
        """Run everything; returns (fused, vis_recon, ir_recon).

        The reconstruction outputs are None when the model was built
        without reconstruction heads.
        """
        self._check_inputs(vis, ir)
        v_rec, v_feats = self.visible(vis)
        i_rec, i_feats = self.infrared(ir)
        f0 = self.stem_reduce(concat([self.stem_v(vis), self.stem_i(ir)], axis=1))
        f = f0
        for group, fuse, vf, if_ in zip(self.groups, self.fusers, v_feats, i_feats):
            f = group(f)
            f = fuse(vf, f, if_)
        fused = self.head2(self.head1(f + f0))
        return fused, v_rec, i_rec

    def fuse_only(self, vis: Tensor, ir: Tensor) -> Tensor:
        """Fused image only (the reconstruction branches still execute:
        their stage features feed the fusion blocks)."""
        return self.forward_all(vis, ir)[0]

    def reconstruct(self, x: Tensor, branch: str) -> Tensor:
        """Run a single reconstruction branch end to end."""
        if branch not in ("visible", "infrared"):
            raise ValueError("branch must be 'visible' or 'infrared'")
        if not self.config.use_ir_heads:
            raise ValueError("model was built without reconstruction heads")
        recon, _ = (self.visible if branch == "visible" else self.infrared)(x)
        return recon


def build_model(cfg: ModelConfig | None = None, **overrides) -> FusionModel:
    """Construct a freshly initialized model (deterministic per seed)."""
    if cfg is None:
        cfg = ModelConfig(**overrides)
    elif overrides:
        cfg = ModelConfig(**{**cfg.to_dict(), **overrides})
    return FusionModel(cfg)
