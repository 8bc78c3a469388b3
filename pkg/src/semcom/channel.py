"""Physical channel: power normalisation, AWGN and flat Rayleigh fading with perfect CSI.

SNR is Es/N0 per complex symbol: with unit average symbol power the total
complex noise variance is ``10 ** (-snr_db / 10)``, split evenly between the
real and imaginary parts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, ops

log = logging.getLogger(__name__)

DEEP_FADE = 1e-12


@dataclass
class ChannelConfig:
    kind: str = "awgn"            # awgn | rayleigh
    snr_db: float = 10.0
    seed: int = 0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in ("awgn", "rayleigh"):
            raise ValueError(f"unknown channel kind {self.kind!r} (expected awgn or rayleigh)")
        if not np.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")

    @property
    def noise_var(self) -> float:
        return snr_to_noise_var(self.snr_db)


@dataclass
class ComplexBlock:
    """Complex symbols held as separate real and imaginary arrays of equal shape."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        self.re = np.asarray(self.re)
        self.im = np.asarray(self.im)
        if self.re.shape != self.im.shape:
            raise ValueError(f"re/im shape mismatch: {self.re.shape} vs {self.im.shape}")

    @classmethod
    def from_complex(cls, z) -> "ComplexBlock":
        z = np.asarray(z)
        return cls(z.real.copy(), z.imag.copy())

    @classmethod
    def from_real(cls, x: np.ndarray) -> "ComplexBlock":
        """Last axis (re0, im0, re1, im1, ...) of width 2K -> K complex symbols."""
        x = np.asarray(x)
        if x.shape[-1] % 2:
            raise ValueError(f"interleaved width must be even, got {x.shape[-1]}")
        return cls(x[..., 0::2].copy(), x[..., 1::2].copy())

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def to_real(self) -> np.ndarray:
        out = np.empty(self.re.shape[:-1] + (2 * self.re.shape[-1],), dtype=self.re.dtype)
        out[..., 0::2] = self.re
        out[..., 1::2] = self.im
        return out

    @property
    def shape(self) -> tuple:
        return self.re.shape

    def mean_power(self) -> float:
        return float(np.mean(self.re ** 2 + self.im ** 2))


def snr_to_noise_var(snr_db: float) -> float:
    return float(10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0))


def complex_gaussian(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian with total variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def power_normalize(x, mask: np.ndarray | None = None, per: str = "batch"):
    """Scale so the average power per complex symbol is one.

    ``x`` is either a :class:`ComplexBlock` or a real Tensor whose last axis
    interleaves re/im parts ([B, L, 2K]). For tensors the scale factor is part
    of the graph; ``mask`` ([B, L]) restricts the average to real positions
    (padding is zeroed), and ``per="sentence"`` normalises each row separately.
    """
    if isinstance(x, ComplexBlock):
        power = x.mean_power()
        if power <= 0:
            raise ValueError("cannot normalise an all-zero block")
        s = 1.0 / np.sqrt(power)
        return ComplexBlock(x.re * s, x.im * s)

    x = ops.as_tensor(x)
    dtype = x.data.dtype
    b, n, width = x.shape
    k = width // 2
    m = np.ones((b, n), dtype=dtype) if mask is None else np.asarray(mask, dtype=dtype)
    x = x * ops.const(m[..., None], dtype=dtype)
    energy = ops.square(x)
    if per == "batch":
        count = m.sum() * k
        if count <= 0:
            raise ValueError("cannot normalise: no valid positions")
        power = ops.sum(energy) * (1.0 / count)
        if power.data <= 0:
            raise ValueError("cannot normalise an all-zero block")
    elif per == "sentence":
        count = m.sum(axis=1) * k
        if np.any(count <= 0):
            raise ValueError("cannot normalise: sentence without valid positions")
        power = ops.sum(energy, axis=(1, 2)) * ops.const(1.0 / count, dtype=dtype)
        if np.any(power.data <= 0):
            raise ValueError("cannot normalise an all-zero sentence")
        power = ops.reshape(power, (b, 1, 1))
    else:
        raise ValueError(f"unknown normalisation scope {per!r}")
    return x / ops.sqrt(power)


def transmit_awgn(x: ComplexBlock, noise_var: float, rng: np.random.Generator) -> ComplexBlock:
    z = x.to_complex()
    if noise_var > 0:
        z = z + complex_gaussian(rng, z.shape, noise_var)
    return ComplexBlock.from_complex(z)


def draw_fading(rng: np.random.Generator, n: int) -> np.ndarray:
    """One unit-variance complex gain per sentence; deep fades are redrawn."""
    h = complex_gaussian(rng, (n,), 1.0)
    bad = np.abs(h) < DEEP_FADE
    while bad.any():
        log.warning("redrawing %d deep-fade channel gain(s)", int(bad.sum()))
        h[bad] = complex_gaussian(rng, (int(bad.sum()),), 1.0)
        bad = np.abs(h) < DEEP_FADE
    return h


def transmit_rayleigh(
    x: ComplexBlock,
    noise_var: float,
    rng: np.random.Generator,
    gain: np.ndarray | None = None,
) -> tuple[ComplexBlock, np.ndarray]:
    """``y = h x + n`` with ``h`` constant per sentence (leading axis), then ``y / h``.

    Returns the equalised block and the gains. ``gain`` may be supplied to
    script the fading.
    """
    z = x.to_complex()
    n_sent = z.shape[0]
    h = draw_fading(rng, n_sent) if gain is None else np.asarray(gain, dtype=complex).reshape(n_sent)
    hb = h.reshape((n_sent,) + (1,) * (z.ndim - 1))
    y = hb * z
    if noise_var > 0:
        y = y + complex_gaussian(rng, z.shape, noise_var)
    return ComplexBlock.from_complex(y / hb), h


def transmit(x: ComplexBlock, cfg: ChannelConfig, rng: np.random.Generator,
             noise_var: float | None = None) -> tuple[ComplexBlock, np.ndarray]:
    """Send ``x`` through ``cfg``'s channel; returns (equalised output, per-sentence gain)."""
    nv = cfg.noise_var if noise_var is None else noise_var
    if cfg.kind == "awgn":
        return transmit_awgn(x, nv, rng), np.ones(x.shape[0], dtype=complex)
    return transmit_rayleigh(x, nv, rng)


def channel_layer(x: Tensor, kind: str, noise_var: float, rng: np.random.Generator) -> tuple[Tensor, np.ndarray]:
    """Differentiable channel on interleaved real symbols [B, L, 2K].

    The sampled perturbation enters the graph as a constant, so the backward
    pass through the channel is the identity.
    """
    block = ComplexBlock.from_real(x.data.astype(np.float64))
    cfg = ChannelConfig(kind=kind, snr_db=0.0)
    received, gain = transmit(block, cfg, rng, noise_var=noise_var)
    delta = received.to_real() - x.data
    return x + ops.const(delta, dtype=x.data.dtype), gain
