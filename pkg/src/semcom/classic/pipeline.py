"""Separate source/channel coding baseline: 5-bit text code, Turbo or RS, 64-QAM."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .. import channel as chan
from ..metrics import EvalRecord, evaluate_text, word_accuracy
from ..seeding import derived_rng
from . import qam
from .rs import RSConfig, RSDecodeError, rs_decode, rs_encode
from .source import SPACE_CODE, BitStream, fixed_length_decode, fixed_length_encode
from .turbo import TurboConfig, turbo_decode, turbo_encode

_SPACE_BITS = np.array([(SPACE_CODE >> s) & 1 for s in range(4, -1, -1)], dtype=np.uint8)


@dataclass
class ClassicResult:
    decoded: list[list[str]]
    record: EvalRecord
    word_accuracy: float
    symbols_per_word: float
    counters: Counter = field(default_factory=Counter)


# ------------------------------------------------------------------ RS framing

def rs_frame(bits: np.ndarray, cfg: RSConfig = RSConfig()) -> list[bytes]:
    """Pack bits into RS data blocks of ``k`` bytes: header (pad count) + payload + zero pad.

    The final partial byte is filled with repetitions of the space codeword so
    no spurious letter can appear after decoding.
    """
    extra = (-bits.size) % 8
    filler = np.resize(_SPACE_BITS, extra)
    payload = np.packbits(np.concatenate([bits, filler]).astype(np.uint8)).tobytes()
    room = cfg.k - 1
    blocks = []
    for start in range(0, max(len(payload), 1), room):
        chunk = payload[start:start + room]
        pad = room - len(chunk)
        blocks.append(bytes([pad]) + chunk + bytes(pad))
    return blocks


def rs_unframe(blocks: list[bytes], cfg: RSConfig = RSConfig()) -> np.ndarray:
    room = cfg.k - 1
    payload = b"".join(blk[1:1 + room - min(blk[0], room)] for blk in blocks)
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))


# ------------------------------------------------------------------ frame chain

def _send_bits(bits: np.ndarray, channel: chan.ChannelConfig, rng: np.random.Generator,
               noise_var: float) -> np.ndarray:
    """Modulate, transmit with perfect-CSI equalisation, return max-log LLRs."""
    sym = qam.qam64_modulate(bits)
    block = chan.ComplexBlock(sym.re[None, :], sym.im[None, :])
    received, gain = chan.transmit(block, channel, rng, noise_var=noise_var)
    eff_var = noise_var / float(np.abs(gain[0]) ** 2)
    flat = chan.ComplexBlock(received.re[0], received.im[0])
    return qam.qam64_demodulate(flat, eff_var)[: bits.size]


def transmit_bits(info: np.ndarray, codec: str, channel: chan.ChannelConfig,
                  rng: np.random.Generator, noise_var: float,
                  turbo_cfg: TurboConfig = TurboConfig(), rs_cfg: RSConfig = RSConfig(),
                  counters: Counter | None = None) -> tuple[np.ndarray, int]:
    """Channel-code, modulate and send one frame of source bits.

    The whole frame sees a single channel realisation. Returns the recovered
    bits (same length as ``info``) and the number of QAM symbols used.
    """
    counters = counters if counters is not None else Counter()
    if codec == "turbo":
        cw = turbo_encode(info, turbo_cfg)
        llr = _send_bits(cw, channel, rng, noise_var)
        out = turbo_decode(llr, info.size, turbo_cfg)
        counters["turbo_blocks"] += 1
        counters["turbo_bit_errors"] += int(np.count_nonzero(out != info))
        return out, -(-cw.size // qam.BITS_PER_SYMBOL)
    if codec == "rs":
        blocks = rs_frame(info, rs_cfg)
        coded = np.unpackbits(np.frombuffer(b"".join(rs_encode(b, rs_cfg) for b in blocks), dtype=np.uint8))
        llr = _send_bits(coded, channel, rng, noise_var)
        rx = np.packbits(qam.hard_bits(llr)).tobytes()
        data_blocks = []
        for i in range(len(blocks)):
            word = rx[i * rs_cfg.n:(i + 1) * rs_cfg.n]
            try:
                data_blocks.append(rs_decode(word, rs_cfg))
            except RSDecodeError:
                counters["rs_failures"] += 1
                data_blocks.append(word[: rs_cfg.k])
        counters["rs_blocks"] += len(blocks)
        out = rs_unframe(data_blocks, rs_cfg)
        if out.size < info.size:
            out = np.concatenate([out, np.zeros(info.size - out.size, dtype=np.uint8)])
        return out[: info.size], -(-coded.size // qam.BITS_PER_SYMBOL)
    raise ValueError(f"unknown codec {codec!r} (expected turbo or rs)")


def pack_frames(lengths: list[int], frame_bits: int) -> list[list[int]]:
    """Greedily group consecutive sentences into frames of at most ``frame_bits`` bits.

    ``frame_bits <= 0`` sends every sentence in its own frame; a sentence
    longer than the limit gets a frame to itself.
    """
    frames: list[list[int]] = []
    current: list[int] = []
    used = 0
    for i, n in enumerate(lengths):
        if current and (frame_bits <= 0 or used + n > frame_bits):
            frames.append(current)
            current, used = [], 0
        current.append(i)
        used += n
    if current:
        frames.append(current)
    return frames


def run_classic_pipeline(sentences: list[list[str]], codec: str, channel: chan.ChannelConfig,
                         seed: int = 0, turbo_cfg: TurboConfig = TurboConfig(),
                         rs_cfg: RSConfig = RSConfig(), noise_var: float | None = None,
                         frame_bits: int = 6144) -> ClassicResult:
    """Text -> 5-bit code -> Turbo/RS -> 64-QAM -> channel -> back to text.

    Sentences are concatenated into frames (one channel-code block and one
    fading realisation each); sentence boundaries inside a frame are known to
    the receiver. Each frame draws noise from its own derived random stream.
    """
    if codec not in ("turbo", "rs"):
        raise ValueError(f"unknown codec {codec!r} (expected turbo or rs)")
    if not sentences:
        raise ValueError("no sentences to transmit")
    nv = channel.noise_var if noise_var is None else noise_var
    counters: Counter = Counter()
    streams = []
    for words in sentences:
        stream, substituted = fixed_length_encode(" ".join(words))
        counters["source_substitutions"] += substituted
        streams.append(stream.bits)
    decoded: list[list[str]] = [[] for _ in sentences]
    symbols = 0
    for f, members in enumerate(pack_frames([s.size for s in streams], frame_bits)):
        info = np.concatenate([streams[i] for i in members])
        if info.size == 0:
            continue
        out, n_sym = transmit_bits(info, codec, channel, derived_rng(seed, f), nv,
                                   turbo_cfg, rs_cfg, counters)
        symbols += n_sym
        counters["frames"] += 1
        pos = 0
        for i in members:
            n = streams[i].size
            decoded[i] = fixed_length_decode(BitStream(out[pos:pos + n])).split()
            pos += n
    n_words = sum(len(s) for s in sentences)
    return ClassicResult(
        decoded=decoded,
        record=evaluate_text(decoded, sentences),
        word_accuracy=word_accuracy(decoded, sentences),
        symbols_per_word=symbols / max(n_words, 1),
        counters=counters,
    )
