"""Fixed-length 5-bit character code and bit packing helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALPHABET = "abcdefghijklmnopqrstuvwxyz .,'?!"
BITS_PER_CHAR = 5
_INDEX = {ch: i for i, ch in enumerate(ALPHABET)}
SPACE_CODE = _INDEX[" "]

assert len(ALPHABET) == 1 << BITS_PER_CHAR


@dataclass
class BitStream:
    bits: np.ndarray      # uint8 0/1 values

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)

    def __len__(self) -> int:
        return self.bits.size

    def pack(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    @classmethod
    def unpack(cls, data: bytes, length: int) -> "BitStream":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if length > bits.size:
            raise ValueError(f"{len(data)} bytes cannot hold {length} bits")
        return cls(bits[:length])


def code_table() -> dict[str, str]:
    """Character -> 5-bit codeword (MSB first)."""
    return {ch: format(i, "05b") for i, ch in enumerate(ALPHABET)}


def fixed_length_encode(text: str) -> tuple[BitStream, int]:
    """Encode ``text`` at 5 bits per character.

    Characters outside the alphabet are sent as a space; the number of such
    substitutions is returned alongside the stream.
    """
    codes = []
    substituted = 0
    for ch in text.lower():
        idx = _INDEX.get(ch)
        if idx is None:
            idx = SPACE_CODE
            substituted += 1
        codes.append(idx)
    if not codes:
        return BitStream(np.zeros(0, dtype=np.uint8)), substituted
    arr = np.array(codes, dtype=np.uint8)
    shifts = np.arange(BITS_PER_CHAR - 1, -1, -1, dtype=np.uint8)
    bits = (arr[:, None] >> shifts[None, :]) & 1
    return BitStream(bits.reshape(-1)), substituted


def fixed_length_decode(stream: BitStream) -> str:
    n = len(stream) // BITS_PER_CHAR
    if n == 0:
        return ""
    bits = stream.bits[: n * BITS_PER_CHAR].reshape(n, BITS_PER_CHAR).astype(np.int64)
    idx = bits @ (1 << np.arange(BITS_PER_CHAR - 1, -1, -1))
    return "".join(ALPHABET[i] for i in idx)
