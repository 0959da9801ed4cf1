"""Deterministic 8-bit image import/export and color conversions.

Supported containers: binary PGM (P5) for grayscale and PNG for 8-bit
gray or RGB. Decoding then re-encoding an 8-bit image is bit-exact.

RGB <-> YCbCr uses the BT.601 full-range matrix on unit-range floats;
constants are pinned to 10 decimal digits so conversions are bit-stable
across platforms:

    Y  =  0.2990000000 R + 0.5870000000 G + 0.1140000000 B
    Cb = -0.1687358916 R - 0.3312641084 G + 0.5000000000 B + 0.5
    Cr =  0.5000000000 R - 0.4186875892 G - 0.0813124108 B + 0.5
    R  = Y + 1.4020000000 (Cr - 0.5)
    G  = Y - 0.3441362862 (Cb - 0.5) - 0.7141362862 (Cr - 0.5)
    B  = Y + 1.7720000000 (Cb - 0.5)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class ImageIOError(OSError):
    pass


@dataclass
class ImageFile:
    """A decoded 8-bit image plus where/how it was stored."""

    path: str
    format: str  # "pgm" | "png"
    mode: str  # "gray" | "rgb"
    data: np.ndarray  # uint8, [H,W] or [H,W,3]


def read_image(path) -> ImageFile:
    path = Path(path)
    if not path.exists():
        raise ImageIOError(f"{path}: no such file")
    if path.suffix.lower() == ".pgm":
        return ImageFile(str(path), "pgm", "gray", _read_pgm(path))
    try:
        img = Image.open(path)
    except Exception as exc:
        raise ImageIOError(f"{path}: cannot decode image ({exc})") from None
    if img.mode == "L":
        return ImageFile(str(path), "png", "gray", np.asarray(img, dtype=np.uint8))
    if img.mode in ("RGB", "RGBA"):
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
        return ImageFile(str(path), "png", "rgb", arr)
    if img.mode in ("I", "I;16", "P", "1"):
        return ImageFile(str(path), "png", "gray", np.asarray(img.convert("L"), dtype=np.uint8))
    raise ImageIOError(f"{path}: unsupported image mode {img.mode}")


def write_image(path, data: np.ndarray):
    """Write uint8 gray [H,W] or RGB [H,W,3]; container from the extension."""
    path = Path(path)
    data = np.asarray(data)
    if data.dtype != np.uint8:
        raise ValueError("write_image expects uint8 data; quantize first")
    if path.suffix.lower() == ".pgm":
        if data.ndim != 2:
            raise ValueError("PGM holds grayscale only")
        _write_pgm(path, data)
    elif path.suffix.lower() == ".png":
        mode = "L" if data.ndim == 2 else "RGB"
        Image.fromarray(data, mode=mode).save(path)
    else:
        raise ValueError(f"unsupported output extension {path.suffix!r} (use .pgm or .png)")


def _read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ImageIOError(f"{path}: not a binary (P5) PGM file")
    # header tokens: magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(raw) and not raw[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ImageIOError(f"{path}: truncated PGM header")
        tokens.append(raw[start:i])
    i += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ImageIOError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=i)
    if data.size != width * height:
        raise ImageIOError(f"{path}: truncated PGM data")
    return data.reshape(height, width).copy()


def _write_pgm(path, data: np.ndarray):
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(data).tobytes())


# ---------------------------------------------------------------------------
# value-range helpers
# ---------------------------------------------------------------------------


def to_unit(data: np.ndarray) -> np.ndarray:
    """uint8 -> float64 in [0, 1]."""
    return np.asarray(data, dtype=np.float64) / 255.0


def from_unit(data: np.ndarray) -> np.ndarray:
    """float in [0, 1] -> uint8 with round-half-even and clamping."""
    return np.clip(np.rint(np.asarray(data, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def resize_bilinear(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a 2D array, half-pixel centers, edges clamped."""
    h2, w2 = size
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape

    def coeffs(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        i0 = np.floor(src).astype(np.int64)
        frac = src - i0
        return np.clip(i0, 0, n_in - 1), np.clip(i0 + 1, 0, n_in - 1), frac

    r0, r1, fr = coeffs(h2, h)
    c0, c1, fc = coeffs(w2, w)
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr[:, None]) + bot * fr[:, None]


# ---------------------------------------------------------------------------
# BT.601 full-range color conversion (unit-range floats)
# ---------------------------------------------------------------------------

_KR, _KG, _KB = 0.2990000000, 0.5870000000, 0.1140000000
_CB_R, _CB_G = -0.1687358916, -0.3312641084
_CR_G, _CR_B = -0.4186875892, -0.0813124108
_R_CR, _B_CB = 1.4020000000, 1.7720000000
_G_CB, _G_CR = -0.3441362862, -0.7141362862


def rgb_to_ycbcr(rgb: np.ndarray):
    """[H,W,3] floats in [0,1] -> (y, cb, cr), chroma centered at 0.5."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = _KR * r + _KG * g + _KB * b
    cb = _CB_R * r + _CB_G * g + 0.5 * b + 0.5
    cr = 0.5 * r + _CR_G * g + _CR_B * b + 0.5
    return y, cb, cr


def ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    r = y + _R_CR * (cr - 0.5)
    g = y + _G_CB * (cb - 0.5) + _G_CR * (cr - 0.5)
    b = y + _B_CB * (cb - 0.5)
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)
