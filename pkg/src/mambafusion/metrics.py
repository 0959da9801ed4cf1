"""Fusion quality metrics.

All metrics treat images on the 8-bit intensity scale [0, 255]. Histogram
metrics (entropy, mutual information) use the quantized view; the others
work on the real-valued view. Sobel responses use mirror boundary
handling, matching the loss module, so constant images score exactly zero.

Conventions pinned here (the literature varies):

- spatial frequency / average gradient denominators count difference
  terms, not pixels;
- VIF is the pixel-domain multi-scale formulation with four scales,
  Gaussian windows of sizes 9/7/5/3 (sigma = size/5) and noise variance
  2.0, averaged over the two sources;
- the edge-transfer metric uses the published sigmoid constants and the
  min/max gradient-strength ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate
from scipy.signal import convolve2d

METRIC_NAMES = ("EN", "SD", "SF", "AG", "MI", "VIF", "Qabf")

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


@dataclass
class GrayImage:
    """H x W image on the [0, 255] scale with a consistent 8-bit view."""

    data: np.ndarray  # float64, values in [0, 255]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("GrayImage expects a 2D array")

    @classmethod
    def from_unit(cls, arr: np.ndarray) -> "GrayImage":
        return cls(np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0) * 255.0)

    @property
    def quantized(self) -> np.ndarray:
        return np.clip(np.rint(self.data), 0, 255).astype(np.uint8)


def _real(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        return img.data
    return np.asarray(img, dtype=np.float64)


def _quant(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        return img.quantized
    return np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# single-image statistics
# ---------------------------------------------------------------------------


def entropy(img) -> float:
    """Shannon entropy of the 256-bin intensity histogram, in bits."""
    hist = np.bincount(_quant(img).ravel(), minlength=256).astype(np.float64)
    p = hist / hist.sum()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def std_dev(img) -> float:
    """Population standard deviation of pixel intensities."""
    return float(np.std(_real(img)))


def spatial_frequency(img) -> float:
    """sqrt(RF^2 + CF^2): RMS of horizontal / vertical first differences."""
    x = _real(img)
    dh = np.diff(x, axis=1)
    dv = np.diff(x, axis=0)
    rf = np.sqrt(np.mean(dh * dh)) if dh.size else 0.0
    cf = np.sqrt(np.mean(dv * dv)) if dv.size else 0.0
    return float(np.sqrt(rf * rf + cf * cf))


def average_gradient(img) -> float:
    """Mean sqrt((dx^2 + dy^2)/2) of forward differences over the interior."""
    x = _real(img)
    dx = x[:-1, 1:] - x[:-1, :-1]
    dy = x[1:, :-1] - x[:-1, :-1]
    if dx.size == 0:
        return 0.0
    return float(np.mean(np.sqrt((dx * dx + dy * dy) / 2.0)))


# ---------------------------------------------------------------------------
# joint statistics
# ---------------------------------------------------------------------------


def _mi_pair(a: np.ndarray, b: np.ndarray) -> float:
    joint, _, _ = np.histogram2d(a.ravel(), b.ravel(), bins=256, range=[[0, 256], [0, 256]])
    pxy = joint / joint.sum()
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return float((pxy[nz] * np.log2(pxy[nz] / (px @ py)[nz])).sum())


def mutual_information(fused, src_a, src_b) -> float:
    """MI(F, A) + MI(F, B), 256-bin joint histograms, in bits."""
    f = _quant(fused)
    return _mi_pair(f, _quant(src_a)) + _mi_pair(f, _quant(src_b))


# ---------------------------------------------------------------------------
# visual information fidelity
# ---------------------------------------------------------------------------

_VIF_WINDOWS = (9, 7, 5, 3)
_VIF_SIGMA_NSQ = 2.0
_VIF_EPS = 1e-10


def _gaussian_window(n: int) -> np.ndarray:
    sigma = n / 5.0
    half = (n - 1) / 2.0
    y, x = np.mgrid[-half : half + 1, -half : half + 1]
    h = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    return h / h.sum()


def _vif_single(ref: np.ndarray, dist: np.ndarray) -> float:
    num = 0.0
    den = 0.0
    for scale, n in enumerate(_VIF_WINDOWS):
        win = _gaussian_window(n)
        if scale > 0:
            if min(ref.shape) < n:
                break
            ref = convolve2d(ref, win, mode="valid")[::2, ::2]
            dist = convolve2d(dist, win, mode="valid")[::2, ::2]
        if min(ref.shape) < n:
            break
        mu1 = convolve2d(ref, win, mode="valid")
        mu2 = convolve2d(dist, win, mode="valid")
        sigma1_sq = convolve2d(ref * ref, win, mode="valid") - mu1 * mu1
        sigma2_sq = convolve2d(dist * dist, win, mode="valid") - mu2 * mu2
        sigma12 = convolve2d(ref * dist, win, mode="valid") - mu1 * mu2
        sigma1_sq = np.maximum(sigma1_sq, 0.0)
        sigma2_sq = np.maximum(sigma2_sq, 0.0)

        g = sigma12 / (sigma1_sq + _VIF_EPS)
        sv_sq = sigma2_sq - g * sigma12
        g[sigma1_sq < _VIF_EPS] = 0.0
        sv_sq[sigma1_sq < _VIF_EPS] = sigma2_sq[sigma1_sq < _VIF_EPS]
        sigma1_sq = np.where(sigma1_sq < _VIF_EPS, 0.0, sigma1_sq)
        g[sigma2_sq < _VIF_EPS] = 0.0
        sv_sq[g < 0.0] = sigma2_sq[g < 0.0]
        g[g < 0.0] = 0.0
        sv_sq = np.maximum(sv_sq, _VIF_EPS)

        num += np.sum(np.log10(1.0 + g * g * sigma1_sq / (sv_sq + _VIF_SIGMA_NSQ)))
        den += np.sum(np.log10(1.0 + sigma1_sq / _VIF_SIGMA_NSQ))
    if den <= 0.0:
        # no information in the reference at all: perfect fidelity by convention
        return 1.0
    return float(num / den)


def vif_fusion(fused, src_a, src_b) -> float:
    """Mean per-source pixel-domain multi-scale VIF of the fused image."""
    f = _real(fused)
    return 0.5 * (_vif_single(_real(src_a), f) + _vif_single(_real(src_b), f))


# ---------------------------------------------------------------------------
# edge transfer (Xydeas-Petrovic)
# ---------------------------------------------------------------------------

_Q_GAMMA_G = 0.9994
_Q_KAPPA_G = -15.0
_Q_SIGMA_G = 0.5
_Q_GAMMA_A = 0.9879
_Q_KAPPA_A = -22.0
_Q_SIGMA_A = 0.8


def _edge_strength_orientation(x: np.ndarray):
    gx = correlate(x, _SOBEL_X, mode="mirror")
    gy = correlate(x, _SOBEL_Y, mode="mirror")
    g = np.hypot(gx, gy)
    alpha = np.where(gx == 0.0, np.pi / 2.0, np.arctan(gy / np.where(gx == 0.0, 1.0, gx)))
    return g, alpha


def _preservation(g_src, a_src, g_f, a_f):
    hi = np.maximum(g_src, g_f)
    lo = np.minimum(g_src, g_f)
    ratio = np.where(hi > 0.0, lo / np.where(hi > 0.0, hi, 1.0), 0.0)
    # orientations are axial (period pi): fold the difference so the
    # metric is invariant under consistent transposition
    d = np.abs(a_src - a_f)
    d = np.minimum(d, np.pi - d)
    a_sim = 1.0 - d / (np.pi / 2.0)
    qg = _Q_GAMMA_G / (1.0 + np.exp(_Q_KAPPA_G * (ratio - _Q_SIGMA_G)))
    qa = _Q_GAMMA_A / (1.0 + np.exp(_Q_KAPPA_A * (a_sim - _Q_SIGMA_A)))
    return qg * qa


def qabf(fused, src_a, src_b) -> float:
    """Edge-strength-weighted edge preservation from both sources."""
    g_f, a_f = _edge_strength_orientation(_real(fused))
    g_a, a_a = _edge_strength_orientation(_real(src_a))
    g_b, a_b = _edge_strength_orientation(_real(src_b))
    q_af = _preservation(g_a, a_a, g_f, a_f)
    q_bf = _preservation(g_b, a_b, g_f, a_f)
    weight = np.sum(g_a + g_b)
    if weight == 0.0:
        return 0.0
    return float(np.sum(q_af * g_a + q_bf * g_b) / weight)


# ---------------------------------------------------------------------------
# aggregation helpers
# ---------------------------------------------------------------------------


def compute_all(fused, src_a, src_b) -> dict[str, float]:
    """All seven metrics of one fused image against its two sources."""
    return {
        "EN": entropy(fused),
        "SD": std_dev(fused),
        "SF": spatial_frequency(fused),
        "AG": average_gradient(fused),
        "MI": mutual_information(fused, src_a, src_b),
        "VIF": vif_fusion(fused, src_a, src_b),
        "Qabf": qabf(fused, src_a, src_b),
    }


def psnr(a, b, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB (infinite for identical images)."""
    mse = float(np.mean((_real(a) - _real(b)) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))
