"""Training losses: intensity + Sobel-gradient terms for fusion and
reconstruction, combined into one weighted total.

All terms are L1 means over H*W (then over the batch). The gradient
operator is the 3x3 Sobel magnitude |Gx| + |Gy| with reflect padding, so
constant images have zero gradient response everywhere (borders included,
up to float rounding). The same magnitude map is used for predictions and
targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import ShapeError, Tensor, absolute, maximum

_SOBEL_X = Tensor(np.array([[[[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]]]))
_SOBEL_Y = Tensor(np.array([[[[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]]]))


@dataclass
class LossWeights:
    """Balance factors: recon-vis, recon-ir, fusion-gradient, recon-gradient."""

    a1: float = 0.5
    a2: float = 0.5
    a3: float = 1.0
    a4: float = 1.0

    def __post_init__(self):
        if min(self.a1, self.a2, self.a3, self.a4) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class LossReport:
    """Scalar values of every term after one forward pass."""

    l_total: float
    l_f: float
    l_v: float
    l_i: float
    l_f_int: float
    l_f_grad: float
    l_v_int: float
    l_v_grad: float
    l_i_int: float
    l_i_grad: float


def sobel_grad(x: Tensor) -> Tensor:
    """|Gx| + |Gy| Sobel magnitude of an [N,1,H,W] image, reflect-padded."""
    if x.ndim != 4 or x.shape[1] != 1:
        raise ShapeError("sobel_grad expects [N,1,H,W]")
    xp = ops.reflect_pad1(x)
    gx = ops.conv2d(xp, _SOBEL_X, pad=0)
    gy = ops.conv2d(xp, _SOBEL_Y, pad=0)
    return absolute(gx) + absolute(gy)


def _l1_mean(diff: Tensor) -> Tensor:
    # ||.||_1 / (H*W), averaged over the batch
    n, _, h, w = diff.shape
    return absolute(diff).sum() * (1.0 / (h * w * n))


def fusion_loss(fused: Tensor, ir: Tensor, vis: Tensor, weights: LossWeights):
    """Pull the fused image toward the elementwise max of the sources,
    in intensity and in gradient magnitude.

    Returns (l_f, l_int, l_grad) with l_f = l_int + a3 * l_grad.
    """
    if fused.shape != ir.shape or fused.shape != vis.shape:
        raise ShapeError("fusion_loss inputs must share one shape")
    l_int = _l1_mean(fused - maximum(ir, vis))
    l_grad = _l1_mean(sobel_grad(fused) - maximum(sobel_grad(ir), sobel_grad(vis)))
    return l_int + weights.a3 * l_grad, l_int, l_grad


def recon_loss(pred: Tensor, target: Tensor, a4: float):
    """Reconstruction penalty: intensity L1 plus a4 * gradient L1."""
    if pred.shape != target.shape:
        raise ShapeError("recon_loss inputs must share one shape")
    l_int = _l1_mean(pred - target)
    l_grad = _l1_mean(sobel_grad(pred) - sobel_grad(target))
    return l_int + a4 * l_grad, l_int, l_grad


def total_loss(
    fused: Tensor,
    vis_recon: Tensor | None,
    ir_recon: Tensor | None,
    vis: Tensor,
    ir: Tensor,
    weights: LossWeights = LossWeights(),
):
    """Combine fusion and reconstruction terms.

    Returns (loss_tensor, LossReport). Reconstruction terms drop out when
    the corresponding prediction is None (no-reconstruction ablation).
    """
    l_f, lf_int, lf_grad = fusion_loss(fused, ir, vis, weights)
    total = l_f
    lv = lv_int = lv_grad = None
    li = li_int = li_grad = None
    if vis_recon is not None:
        lv, lv_int, lv_grad = recon_loss(vis_recon, vis, weights.a4)
        total = total + weights.a1 * lv
    if ir_recon is not None:
        li, li_int, li_grad = recon_loss(ir_recon, ir, weights.a4)
        total = total + weights.a2 * li
    if not np.isfinite(total.item()):
        raise FloatingPointError("non-finite loss")

    def val(t):
        return 0.0 if t is None else t.item()

    report = LossReport(
        l_total=total.item(),
        l_f=l_f.item(),
        l_v=val(lv),
        l_i=val(li),
        l_f_int=lf_int.item(),
        l_f_grad=lf_grad.item(),
        l_v_int=val(lv_int),
        l_v_grad=val(lv_grad),
        l_i_int=val(li_int),
        l_i_grad=val(li_grad),
    )
    return total, report
