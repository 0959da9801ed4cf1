"""Command-line front end.

Subcommands: fuse, reconstruct, train, eval, rank, synth. Exit codes:
0 success, 1 I/O failure, 2 validation failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we want 64
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mambafusion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse a visible/infrared image pair")
    p.add_argument("--visible", required=True)
    p.add_argument("--infrared", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resize", type=int, default=None, help="square-resize inputs first")

    p = sub.add_parser("reconstruct", help="run one reconstruction branch")
    p.add_argument("--input", required=True)
    p.add_argument("--branch", required=True, choices=["visible", "infrared"])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train on a visible/ + infrared/ dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value (repeatable)",
    )

    p = sub.add_parser("eval", help="score fused images against their sources")
    p.add_argument("--fused", required=True)
    p.add_argument("--src-a", required=True)
    p.add_argument("--src-b", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("rank", help="competition ranks + average rank of score tables")
    p.add_argument("--tables", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("synth", help="generate a synthetic registered dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["png", "pgm"], default="png")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load_luma(path, resize: int | None):
    """Read an image as unit-range luminance; keep chroma when RGB."""
    from .imageio import read_image, resize_bilinear, rgb_to_ycbcr, to_unit

    img = read_image(path)
    if img.mode == "rgb":
        y, cb, cr = rgb_to_ycbcr(to_unit(img.data))
    else:
        y, cb, cr = to_unit(img.data), None, None
    if resize is not None:
        y = resize_bilinear(y, (resize, resize))
        if cb is not None:
            cb = resize_bilinear(cb, (resize, resize))
            cr = resize_bilinear(cr, (resize, resize))
    return img, y, cb, cr


def _check_extents(shape):
    from .tensor import ShapeError

    h, w = shape
    if h % 4 or w % 4:
        raise ShapeError(f"spatial extents must be divisible by 4, got {h}x{w}")


def _cmd_fuse(args) -> int:
    from .checkpoint import load_model
    from .imageio import from_unit, write_image, ycbcr_to_rgb
    from .tensor import Tensor, no_grad

    vis_img, vy, vcb, vcr = _load_luma(args.visible, args.resize)
    ir_img, iy, _, _ = _load_luma(args.infrared, args.resize)
    if vy.shape != iy.shape:
        raise ValueError(f"dimension mismatch: visible {vy.shape} vs infrared {iy.shape}")
    _check_extents(vy.shape)
    model = load_model(args.checkpoint)
    with no_grad():
        fused = model.fuse_only(Tensor(vy[None, None]), Tensor(iy[None, None]))
    fy = np.clip(fused.data[0, 0], 0.0, 1.0)
    out = Path(args.out)
    if vis_img.mode == "rgb" and out.suffix.lower() == ".png":
        write_image(out, from_unit(ycbcr_to_rgb(fy, vcb, vcr)))
    else:
        write_image(out, from_unit(fy))
    print(f"fused {args.visible} + {args.infrared} -> {out}")
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    from .checkpoint import load_model
    from .imageio import from_unit, write_image
    from .tensor import Tensor, no_grad

    _, y, _, _ = _load_luma(args.input, None)
    _check_extents(y.shape)
    model = load_model(args.checkpoint)
    with no_grad():
        recon = model.reconstruct(Tensor(y[None, None]), args.branch)
    write_image(args.out, from_unit(np.clip(recon.data[0, 0], 0.0, 1.0)))
    print(f"reconstructed {args.input} ({args.branch} branch) -> {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .config import RunConfig, apply_overrides, load_config
    from .reporting import write_loss_figure
    from .synthetic import load_dataset
    from .trainer import train

    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, val = item.partition("=")
        overrides[key.strip()] = val.strip()
    cfg = apply_overrides(cfg, overrides)

    pairs, _ = load_dataset(args.data)
    out_dir = Path(args.out)

    def progress(row):
        print(
            f"iter {row['iter']:5d} epoch {row['epoch']:3d} lr {row['lr']:.2e} "
            f"l_total {row['l_total']:.5f} l_f {row['l_f']:.5f} "
            f"l_v {row['l_v']:.5f} l_i {row['l_i']:.5f}"
        )

    _, history = train(
        pairs,
        model_cfg=cfg.model,
        train_cfg=cfg.train,
        loss_weights=cfg.loss,
        out_dir=out_dir,
        progress=progress,
        log_every=max(1, len(pairs) // cfg.train.batch),
    )
    write_loss_figure(out_dir / "loss_curve.png", history)
    print(f"final l_total {history[-1]['l_total']:.5f} after {len(history)} iterations")
    print(f"checkpoint: {out_dir / 'checkpoint_final.ckpt'}")
    return EXIT_OK


def _listing(directory) -> dict[str, Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"{d}: not a directory")
    return {p.name: p for p in d.iterdir() if p.is_file()}


def _cmd_eval(args) -> int:
    import os
    from concurrent.futures import ThreadPoolExecutor

    from .imageio import read_image, rgb_to_ycbcr, to_unit
    from .metrics import compute_all
    from .reporting import write_metrics_report

    dirs = {"fused": _listing(args.fused), "src-a": _listing(args.src_a), "src-b": _listing(args.src_b)}
    common = set.intersection(*(set(d) for d in dirs.values()))
    unmatched = {k: sorted(set(d) - common) for k, d in dirs.items()}
    if any(unmatched.values()):
        for k, names in unmatched.items():
            if names:
                print(f"unmatched files in --{k}: {', '.join(names)}", file=sys.stderr)
        raise ValueError("filename sets of the three directories do not match")
    if not common:
        raise ValueError("no image triples found")

    def gray255(path):
        img = read_image(path)
        if img.mode == "rgb":
            y, _, _ = rgb_to_ycbcr(to_unit(img.data))
            return y * 255.0
        return img.data.astype(np.float64)

    def score(name):
        return {
            "name": name,
            **compute_all(
                gray255(dirs["fused"][name]), gray255(dirs["src-a"][name]), gray255(dirs["src-b"][name])
            ),
        }

    # triples are independent; results are gathered in name order
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        rows = list(pool.map(score, sorted(common)))
    paths = write_metrics_report(args.report, rows, figure=not args.no_figure)
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def _cmd_rank(args) -> int:
    from .ranking import avg_rank, load_table_csv, save_rank_csv
    from .reporting import write_rank_figure

    tables = [(Path(t), load_table_csv(t)) for t in args.tables]
    out = Path(args.out)
    outputs = []
    if len(tables) == 1 and out.suffix == ".csv":
        targets = [out]
        out.parent.mkdir(parents=True, exist_ok=True)
    else:
        out.mkdir(parents=True, exist_ok=True)
        targets = [out / f"{src.stem}_ranks.csv" for src, _ in tables]
    for (src, table), target in zip(tables, targets):
        save_rank_csv(target, table)
        outputs.append(target)
        if not args.no_figure:
            fig = target.with_suffix(".png")
            write_rank_figure(fig, table.methods, avg_rank(table))
            outputs.append(fig)
    print("wrote " + ", ".join(str(p) for p in outputs))
    return EXIT_OK


def _cmd_synth(args) -> int:
    from .synthetic import write_dataset

    names = write_dataset(args.out, args.pairs, (args.size, args.size), args.seed, args.format)
    print(f"wrote {len(names)} pairs under {args.out}/visible and {args.out}/infrared")
    return EXIT_OK


_COMMANDS = {
    "fuse": _cmd_fuse,
    "reconstruct": _cmd_reconstruct,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "rank": _cmd_rank,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    from .checkpoint import CheckpointError
    from .imageio import ImageIOError
    from .tensor import ShapeError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageIOError, CheckpointError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ShapeError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
