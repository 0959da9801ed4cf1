"""2D Fourier transforms over the spatial axes, with autodiff support.

The forward transform is unnormalized and the inverse carries the 1/(HW)
factor (numpy convention). Spectra are held as a pair of real tensors so
amplitude/phase processing stays inside the ordinary autodiff graph; only
the transforms themselves need custom adjoints.

Arbitrary spatial extents are supported (the backend is numpy's pocketfft,
which is mixed-radix with a Bluestein fallback).
"""

from __future__ import annotations

import numpy as np

from .tensor import Function, Tensor, cos, mul, sin

_PHASE_GUARD = 1e-300  # keeps amp/phase backward finite on zero bins


class ComplexTensor:
    """Complex array as (re, im) real tensors sharing one shape."""

    __slots__ = ("re", "im")

    def __init__(self, re: Tensor, im: Tensor):
        if re.shape != im.shape:
            raise ValueError("re/im shape mismatch")
        self.re = re
        self.im = im

    @property
    def shape(self):
        return self.re.shape

    def numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    def __repr__(self):
        return f"ComplexTensor(shape={self.shape})"


class _FFT2(Function):
    def forward(self, x):
        spec = np.fft.fft2(x, axes=(-2, -1))
        return np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag)

    def backward(self, gre, gim):
        n = gre.shape[-2] * gre.shape[-1]
        g = gre + 1j * gim
        return (n * np.fft.ifft2(g, axes=(-2, -1)).real,)


class _IFFT2Real(Function):
    """Real part of the inverse transform of an (re, im) spectrum."""

    def forward(self, re, im):
        out = np.fft.ifft2(re + 1j * im, axes=(-2, -1))
        return np.ascontiguousarray(out.real)

    def backward(self, g):
        n = g.shape[-2] * g.shape[-1]
        spec = np.fft.fft2(g.astype(np.complex128), axes=(-2, -1)) / n
        return np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag)


class _AmpPhase(Function):
    """Fused |z| and arg(z) with guarded gradients at z == 0."""

    def forward(self, re, im):
        amp = np.hypot(re, im)
        phase = np.arctan2(im, re)
        self.re, self.im, self.amp = re, im, amp
        return amp, phase

    def backward(self, gamp, gphase):
        re, im, amp = self.re, self.im, self.amp
        inv_amp = 1.0 / np.maximum(amp, _PHASE_GUARD)
        inv_r2 = inv_amp * inv_amp
        nz = amp > 0.0
        gre = (gamp * re * inv_amp - gphase * im * inv_r2) * nz
        gim = (gamp * im * inv_amp + gphase * re * inv_r2) * nz
        return gre, gim

    def release(self):
        self.re = self.im = self.amp = None


def fft2(x: Tensor) -> ComplexTensor:
    """Full complex 2D DFT of a real NCHW tensor (per channel)."""
    re, im = _FFT2.apply(x)
    return ComplexTensor(re, im)


def ifft2(spec: ComplexTensor) -> Tensor:
    """Real part of the inverse 2D DFT."""
    return _IFFT2Real.apply(spec.re, spec.im)


def ifft2_complex(spec: ComplexTensor) -> ComplexTensor:
    """Full complex inverse transform (no graph), for residue inspection."""
    out = np.fft.ifft2(spec.re.data + 1j * spec.im.data, axes=(-2, -1))
    return ComplexTensor(Tensor(out.real), Tensor(out.imag))


def to_amp_phase(spec: ComplexTensor) -> tuple[Tensor, Tensor]:
    """Split a spectrum into amplitude (>= 0) and phase in (-pi, pi]."""
    return _AmpPhase.apply(spec.re, spec.im)


def from_amp_phase(amp: Tensor, phase: Tensor) -> ComplexTensor:
    """Recompose a spectrum: re = a cos(p), im = a sin(p)."""
    return ComplexTensor(mul(amp, cos(phase)), mul(amp, sin(phase)))
