"""Synthetic registered image pairs for tests and demos.

Pairs emulate the two modalities: the "texture" image carries smooth
illumination gradients, sinusoidal texture and sharp-edged shapes; the
"thermal" image shows the same shapes as smooth bright blobs on a dark,
nearly texture-free background. Everything is deterministic per seed, so
no external dataset is needed anywhere in the test suite.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imageio import from_unit, write_image


def synthesize_pair(seed: int, size: tuple[int, int] = (64, 64)):
    """One registered (visible-like, infrared-like) pair in [0, 1]."""
    h, w = size
    rng = np.random.default_rng(seed)
    grid = np.mgrid[0:h, 0:w]
    yy = grid[0] / max(h - 1, 1)
    xx = grid[1] / max(w - 1, 1)

    gdir = rng.uniform(0, 2 * np.pi)
    vis = 0.35 + 0.25 * (np.cos(gdir) * xx + np.sin(gdir) * yy)
    fx, fy = rng.uniform(2.5, 6.0, size=2)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    vis += 0.08 * np.sin(2 * np.pi * fx * xx + phase[0]) * np.cos(2 * np.pi * fy * yy + phase[1])

    ir = 0.12 + 0.05 * yy + 0.02 * rng.standard_normal((h, w))

    # shared objects: rectangles with texture in vis, hot blobs in ir
    n_obj = rng.integers(2, 5)
    for _ in range(n_obj):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        ry, rx = rng.uniform(0.08, 0.2, size=2)
        rect = (np.abs(yy - cy) < ry) & (np.abs(xx - cx) < rx)
        vis = np.where(rect, vis * 0.5 + rng.uniform(0.1, 0.9), vis)
        d2 = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        ir = ir + rng.uniform(0.5, 0.9) * np.exp(-1.5 * d2)

    return np.clip(vis, 0.0, 1.0), np.clip(ir, 0.0, 1.0)


def make_pairs(n: int, size=(64, 64), seed: int = 0):
    """n deterministic pairs; pair k uses seed seed*1000 + k."""
    return [synthesize_pair(seed * 1000 + k, size) for k in range(n)]


def write_dataset(out_dir, n: int, size=(64, 64), seed: int = 0, fmt: str = "png"):
    """Write visible/ and infrared/ subdirectories of matched files."""
    out_dir = Path(out_dir)
    vis_dir = out_dir / "visible"
    ir_dir = out_dir / "infrared"
    vis_dir.mkdir(parents=True, exist_ok=True)
    ir_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for k, (vis, ir) in enumerate(make_pairs(n, size, seed)):
        name = f"pair_{k:03d}.{fmt}"
        write_image(vis_dir / name, from_unit(vis))
        write_image(ir_dir / name, from_unit(ir))
        names.append(name)
    return names


def load_dataset(data_dir):
    """Read back a visible/ + infrared/ dataset as unit-range pairs."""
    from .imageio import read_image, to_unit

    data_dir = Path(data_dir)
    vis_dir = data_dir / "visible"
    ir_dir = data_dir / "infrared"
    if not vis_dir.is_dir() or not ir_dir.is_dir():
        raise FileNotFoundError(f"{data_dir}: expected visible/ and infrared/ subdirectories")
    vis_names = sorted(p.name for p in vis_dir.iterdir() if p.is_file())
    ir_names = sorted(p.name for p in ir_dir.iterdir() if p.is_file())
    if vis_names != ir_names:
        only_v = sorted(set(vis_names) - set(ir_names))
        only_i = sorted(set(ir_names) - set(vis_names))
        raise ValueError(f"unmatched dataset files: visible-only={only_v} infrared-only={only_i}")
    pairs = []
    for name in vis_names:
        v = read_image(vis_dir / name)
        i = read_image(ir_dir / name)
        vy = to_unit(v.data) if v.mode == "gray" else _luminance(v.data)
        iy = to_unit(i.data) if i.mode == "gray" else _luminance(i.data)
        pairs.append((vy, iy))
    return pairs, vis_names


def _luminance(rgb_u8: np.ndarray) -> np.ndarray:
    from .imageio import rgb_to_ycbcr, to_unit

    y, _, _ = rgb_to_ycbcr(to_unit(rgb_u8))
    return y
