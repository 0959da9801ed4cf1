"""Optimization: AdamW, the warmup + exponential-decay schedule, and the
training loop over registered image pairs.

The schedule grows linearly from ``warmup_start_lr`` to ``lr`` across the
first ``warmup_iters`` iterations, then decays by ``decay`` per epoch.
Weight decay is decoupled (applied to the parameter directly, scaled by
the current learning rate, independent of the moment update).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import save_model
from .losses import LossWeights, total_loss
from .model import FusionModel, ModelConfig, build_model
from .tensor import Tensor, backward


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-2
    warmup_iters: int = 800
    warmup_start_lr: float = 1e-5
    epochs: int = 30
    batch: int = 20
    decay: float = 0.92
    input_size: int = 128
    seed: int = 0
    max_iters: int | None = None
    grad_clip: float | None = None  # max global grad norm, off by default

    def __post_init__(self):
        if self.warmup_start_lr > self.lr:
            raise ValueError("warmup_start_lr must not exceed lr")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


def lr_at(iteration: int, epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a given global iteration and epoch index."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if iteration < cfg.warmup_iters:
        frac = iteration / cfg.warmup_iters
        return cfg.warmup_start_lr + (cfg.lr - cfg.warmup_start_lr) * frac
    return cfg.lr * cfg.decay**epoch


class AdamW:
    """Decoupled-weight-decay Adam over named parameters."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, params, weight_decay: float = 0.0):
        self.params = list(params)
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr: float):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.BETA1**t
        bc2 = 1.0 - self.BETA2**t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                raise ValueError("parameter has no gradient; run backward first")
            m *= self.BETA1
            m += (1.0 - self.BETA1) * g
            v *= self.BETA2
            v += (1.0 - self.BETA2) * (g * g)
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.EPS)


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = total**0.5
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


LOG_FIELDS = ("iter", "epoch", "lr", "l_total", "l_f", "l_v", "l_i")


def _resize_unit(img: np.ndarray, size: int) -> np.ndarray:
    from .imageio import resize_bilinear

    if img.shape == (size, size):
        return img
    return resize_bilinear(img, (size, size))


def train(
    pairs,
    model_cfg: ModelConfig | None = None,
    train_cfg: TrainConfig | None = None,
    loss_weights: LossWeights | None = None,
    out_dir=None,
    model: FusionModel | None = None,
    log_every: int = 1,
    progress=None,
):
    """Optimize a fusion model on (visible, infrared) unit-range pairs.

    ``pairs`` is a sequence of (vis, ir) 2D float arrays in [0, 1]; they
    are bilinearly resized to the configured square input size. Returns
    (model, history) where history is one dict per iteration with the
    ``LOG_FIELDS`` entries. With ``out_dir`` set, writes ``loss_log.csv``,
    a rolling per-epoch checkpoint and ``checkpoint_final.ckpt``.
    """
    if not pairs:
        raise ValueError("empty dataset")
    train_cfg = train_cfg or TrainConfig()
    loss_weights = loss_weights or LossWeights()
    if model is None:
        model_cfg = model_cfg or ModelConfig()
        model = build_model(model_cfg)

    size = train_cfg.input_size
    vis = np.stack([_resize_unit(np.asarray(v, dtype=np.float64), size) for v, _ in pairs])
    ir = np.stack([_resize_unit(np.asarray(i, dtype=np.float64), size) for _, i in pairs])
    n = len(pairs)

    params = model.parameters()
    opt = AdamW(params, weight_decay=train_cfg.weight_decay)
    steps_per_epoch = (n + train_cfg.batch - 1) // train_cfg.batch
    total_iters = train_cfg.epochs * steps_per_epoch
    if train_cfg.max_iters is not None:
        total_iters = min(total_iters, train_cfg.max_iters)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    history: list[dict] = []
    it = 0
    epoch = 0
    while it < total_iters:
        for s in range(steps_per_epoch):
            if it >= total_iters:
                break
            lo = s * train_cfg.batch
            hi = min(n, lo + train_cfg.batch)
            bv = Tensor(vis[lo:hi, None])
            bi = Tensor(ir[lo:hi, None])
            lr = lr_at(it, epoch, train_cfg)

            opt.zero_grad()
            fused, v_rec, i_rec = model.forward_all(bv, bi)
            loss, report = total_loss(fused, v_rec, i_rec, bv, bi, loss_weights)
            backward(loss)
            if train_cfg.grad_clip is not None:
                clip_grad_norm(params, train_cfg.grad_clip)
            opt.step(lr)

            row = {
                "iter": it,
                "epoch": epoch,
                "lr": lr,
                "l_total": report.l_total,
                "l_f": report.l_f,
                "l_v": report.l_v,
                "l_i": report.l_i,
            }
            history.append(row)
            if progress is not None and it % log_every == 0:
                progress(row)
            it += 1
        if out_dir is not None:
            save_model(out_dir / "checkpoint_last_epoch.ckpt", model, {"epoch": epoch})
        epoch += 1

    if out_dir is not None:
        save_model(out_dir / "checkpoint_final.ckpt", model, {"iters": it})
        write_loss_log(out_dir / "loss_log.csv", history)
    return model, history


def write_loss_log(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in LOG_FIELDS})
