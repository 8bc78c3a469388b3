"""Gray-mapped square 64-QAM with max-log LLR demodulation.

Six bits per symbol: the first three pick the in-phase level, the last three
the quadrature level. Levels are {+-1, +-3, +-5, +-7} / sqrt(42), which gives
unit average energy. LLR sign convention: positive means bit 0.
"""
from __future__ import annotations

import numpy as np

from ..channel import ComplexBlock

BITS_PER_SYMBOL = 6
SCALE = 1.0 / np.sqrt(42.0)

# 3-bit Gray label at each of the 8 amplitude levels, left to right
_GRAY = np.array([0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100])
LEVELS = np.arange(-7, 8, 2) * SCALE
# amplitude of each 3-bit label
_LABEL_TO_LEVEL = np.empty(8)
_LABEL_TO_LEVEL[_GRAY] = LEVELS
# bit j (MSB first) of the label sitting at each level index
_LEVEL_BITS = (_GRAY[:, None] >> np.array([2, 1, 0])[None, :]) & 1


def constellation() -> np.ndarray:
    """All 64 points indexed by the 6-bit label (MSB first)."""
    labels = np.arange(64)
    return _LABEL_TO_LEVEL[labels >> 3] + 1j * _LABEL_TO_LEVEL[labels & 7]


def pad_bits(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    extra = (-bits.size) % BITS_PER_SYMBOL
    return np.concatenate([bits, np.zeros(extra, dtype=np.uint8)]) if extra else bits


def qam64_modulate(bits) -> ComplexBlock:
    """Map bits (padded with zeros to a multiple of 6) to one row of symbols."""
    b = pad_bits(bits).reshape(-1, BITS_PER_SYMBOL).astype(np.int64)
    i_label = (b[:, 0] << 2) | (b[:, 1] << 1) | b[:, 2]
    q_label = (b[:, 3] << 2) | (b[:, 4] << 1) | b[:, 5]
    return ComplexBlock(_LABEL_TO_LEVEL[i_label], _LABEL_TO_LEVEL[q_label])


def _axis_llr(r: np.ndarray, noise_var: np.ndarray) -> np.ndarray:
    # squared distance to every level, [n, 8]
    d2 = (r[:, None] - LEVELS[None, :]) ** 2
    out = np.empty((r.size, 3))
    for j in range(3):
        one = _LEVEL_BITS[:, j] == 1
        out[:, j] = d2[:, one].min(axis=1) - d2[:, ~one].min(axis=1)
    return out / noise_var[:, None]


def qam64_demodulate(y: ComplexBlock, noise_var) -> np.ndarray:
    """Max-log LLR per bit; ``noise_var`` is the complex noise variance (scalar or per symbol)."""
    re = np.asarray(y.re, dtype=np.float64).reshape(-1)
    im = np.asarray(y.im, dtype=np.float64).reshape(-1)
    nv = np.broadcast_to(np.maximum(np.asarray(noise_var, dtype=np.float64), 1e-30), re.shape)
    llr = np.concatenate([_axis_llr(re, nv), _axis_llr(im, nv)], axis=1)
    return llr.reshape(-1)


def hard_bits(llr: np.ndarray) -> np.ndarray:
    return (np.asarray(llr) < 0).astype(np.uint8)
