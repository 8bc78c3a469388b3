"""End-to-end semantic transceiver.

Embedding -> UT encoder (ACT) -> dense channel encoder -> channel ->
dense channel decoder -> UT decoder (ACT) -> dictionary softmax.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import channel as chan
from ..autodiff import ParamGroup, Tensor, ops
from ..text import END, PAD, START, Batch
from .act import ACTResult, act_run
from .config import UTConfig
from .layers import (
    CoordinateEmbedding,
    DecoderBlock,
    Dense,
    EncoderBlock,
    Registry,
    causal_bias,
    padding_bias,
)

# parameter-name prefixes of the four coding stages and the halting layers
SEMANTIC_ENCODER = "enc."
CHANNEL_ENCODER = "chan_enc."
CHANNEL_DECODER = "chan_dec."
SEMANTIC_DECODER = "dec."
HALTING = "halt."


@dataclass
class LossParts:
    total: Tensor
    ce: Tensor
    ponder: Tensor
    enc_cycles: float
    dec_cycles: float

    @property
    def mean_cycles(self) -> float:
        return 0.5 * (self.enc_cycles + self.dec_cycles)


@dataclass
class Encoded:
    features: Tensor          # M, [B, L, d]
    act: ACTResult | None
    mask: np.ndarray          # [B, L]


class SemanticCodec:
    def __init__(self, config: UTConfig, seed: int = 0):
        self.config = c = config
        self.seed = seed
        reg = Registry(np.random.default_rng(seed))
        d = c.d_model

        self.enc_embed = reg.add("enc.embed", reg.rng.uniform(-1, 1, (c.vocab_size, d)) / math.sqrt(d))
        n_blocks = c.layers if c.untied else 1
        self.enc_blocks = [EncoderBlock(reg, f"enc.block{i}", d, c.heads, c.ffn_inner, c.dropout)
                           for i in range(n_blocks)]
        last = "relu" if c.channel_activation == "relu" else None
        self.chan_enc = [Dense(reg, "chan_enc.0", d, c.channel_hidden, "relu"),
                         Dense(reg, "chan_enc.1", c.channel_hidden, 2 * c.k_symbols, last)]
        self.chan_dec = [Dense(reg, "chan_dec.0", 2 * c.k_symbols, c.channel_hidden, "relu"),
                         Dense(reg, "chan_dec.1", c.channel_hidden, d, last)]
        self.dec_embed = reg.add("dec.embed", reg.rng.uniform(-1, 1, (c.vocab_size, d)) / math.sqrt(d))
        self.dec_blocks = [DecoderBlock(reg, f"dec.block{i}", d, c.heads, c.ffn_inner, c.dropout)
                           for i in range(n_blocks)]
        self.predict = Dense(reg, "dec.predict", d, c.vocab_size)
        if c.act:
            self.enc_halt = Dense(reg, "halt.enc", d, 1, "sigmoid", bias_init=c.halt_bias_init)
            self.dec_halt = Dense(reg, "halt.dec", d, 1, "sigmoid", bias_init=c.halt_bias_init)
        self.coords = CoordinateEmbedding(d, c.max_len + 2, max(c.depth, 1))
        self.params: dict[str, Tensor] = reg.params
        self.training = False

    # ------------------------------------------------------------ bookkeeping

    def train(self, mode: bool = True) -> "SemanticCodec":
        self.training = mode
        return self

    def eval(self) -> "SemanticCodec":
        return self.train(False)

    def param_count(self, trainable_only: bool = True) -> int:
        return int(sum(p.size for p in self.params.values() if p.requires_grad or not trainable_only))

    def param_groups(self, lr_main: float, lr_act: float) -> list[ParamGroup]:
        main = {k: v for k, v in self.params.items() if not k.startswith(HALTING)}
        act = {k: v for k, v in self.params.items() if k.startswith(HALTING)}
        groups = [ParamGroup("main", main, lr_main)]
        if act:
            groups.append(ParamGroup("act", act, lr_act))
        return groups

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        unknown = sorted(set(state) - set(self.params))
        if unknown:
            raise ValueError(f"unknown tensor {unknown[0]!r} in checkpoint")
        missing = sorted(set(self.params) - set(state))
        if missing:
            raise ValueError(f"checkpoint lacks tensor {missing[0]!r}")
        for name, arr in state.items():
            p = self.params[name]
            if tuple(arr.shape) != p.shape:
                raise ValueError(f"tensor {name!r}: checkpoint shape {tuple(arr.shape)} != model shape {p.shape}")
        for name, arr in state.items():
            self.params[name].data = np.array(arr, dtype=self.params[name].data.dtype)

    # ------------------------------------------------------------ stages

    def _stack(self, x: Tensor, blocks, halt: Dense | None, mask: np.ndarray, call, trace=False):
        c = self.config

        def step(t: int, state: Tensor):
            pre = self.coords(state, t)
            block = blocks[t] if len(blocks) > 1 else blocks[0]
            return pre, call(block, pre)

        if c.act:
            def halting(pre: Tensor, t: int) -> Tensor:
                return halt(pre)

            res = act_run(x, step, halting, c.act_threshold, c.max_cycles, valid=mask > 0,
                          output_mode=c.act_output, trace=trace)
            return res.output, res
        state = x
        for t in range(c.layers):
            _, state = step(t, state)
        return state, None

    def encode(self, ids: np.ndarray, mask: np.ndarray, rng=None, trace=False) -> Encoded:
        """Semantic encoder: word ids [B, L] -> features M [B, L, d]."""
        c = self.config
        x = ops.embedding(self.enc_embed, ids) * math.sqrt(c.d_model)
        x = ops.dropout(x, c.dropout, rng, self.training)
        bias = padding_bias(mask, x.data.dtype)
        m, res = self._stack(x, self.enc_blocks, getattr(self, "enc_halt", None), mask,
                             lambda blk, pre: blk(pre, bias, rng, self.training), trace=trace)
        return Encoded(m, res, mask)

    def channel_encode(self, features: Tensor) -> Tensor:
        """Dense channel encoder: [B, L, d] -> [B, L, 2K] interleaved re/im."""
        x = features
        for layer in self.chan_enc:
            x = layer(x)
        return x

    def channel_decode(self, received: Tensor) -> Tensor:
        """Dense channel decoder: [B, L, 2K] -> [B, L, d]."""
        x = received
        for layer in self.chan_dec:
            x = layer(x)
        return x

    def transmit(self, features: Tensor, mask: np.ndarray, channel: str, noise_var: float,
                 rng: np.random.Generator) -> Tensor:
        """Channel encoder, power normalisation, channel with CSI equalisation, channel decoder."""
        x = self.channel_encode(features)
        x = chan.power_normalize(x, mask, per=self.config.power_norm)
        y, _ = chan.channel_layer(x, channel, noise_var, rng)
        return self.channel_decode(y)

    def decode(self, memory: Tensor, src_mask: np.ndarray, dec_in: np.ndarray,
               rng=None, trace=False) -> tuple[Tensor, ACTResult | None]:
        """Semantic decoder with teacher forcing: returns logits [B, T, V]."""
        c = self.config
        if dec_in.shape[1] > c.max_len + 2:
            raise ValueError(f"target length {dec_in.shape[1]} exceeds supported length {c.max_len + 2}")
        tmask = (dec_in != PAD).astype(np.float32)
        x = ops.embedding(self.dec_embed, dec_in) * math.sqrt(c.d_model)
        x = ops.dropout(x, c.dropout, rng, self.training)
        dtype = x.data.dtype
        self_bias = padding_bias(tmask, dtype) + causal_bias(dec_in.shape[1], dtype)
        cross_bias = padding_bias(src_mask, dtype)
        y, res = self._stack(x, self.dec_blocks, getattr(self, "dec_halt", None), tmask,
                             lambda blk, pre: blk(pre, memory, self_bias, cross_bias, rng, self.training),
                             trace=trace)
        return self.predict(y), res

    # ------------------------------------------------------------ training objective

    def loss(self, batch: Batch, channel: str, noise_var: float, rng: np.random.Generator) -> LossParts:
        mask = batch.mask
        enc = self.encode(batch.ids, mask, rng)
        memory = self.transmit(enc.features, mask, channel, noise_var, rng)
        dec_in, dec_out, tmask = batch.decoder_io()
        logits, dec_res = self.decode(memory, mask, dec_in, rng)
        return total_loss(logits, dec_out, tmask, [enc.act, dec_res], self)

    # ------------------------------------------------------------ inference

    def greedy_decode(self, memory: Tensor, src_mask: np.ndarray, lengths: np.ndarray,
                      extra: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Greedy step-by-step decoding, at most ``length + extra`` tokens per sentence.

        Returns ids [B, T] (PAD after ``<END>``) and the decoder cycle count per
        emitted token position (0 where nothing was emitted).
        """
        b = memory.shape[0]
        steps = int(lengths.max()) + extra
        seq = np.full((b, 1), START, dtype=np.int64)
        done = np.zeros(b, dtype=bool)
        out = np.full((b, steps), PAD, dtype=np.int64)
        cycles = np.zeros((b, steps))
        for t in range(steps):
            logits, res = self.decode(memory, src_mask, seq)
            nxt = logits.data[:, -1, :].argmax(axis=-1)
            limit = t >= lengths + extra - 1
            nxt = np.where(limit & ~done, END, nxt)
            nxt = np.where(done, PAD, nxt)
            out[:, t] = nxt
            if res is not None:
                cycles[:, t] = np.where(done, 0, res.cycles[:, -1])
            done |= nxt == END
            seq = np.concatenate([seq, nxt[:, None]], axis=1)
            if done.all():
                out, cycles = out[:, :t + 1], cycles[:, :t + 1]
                break
        return out, cycles

    def transceive(self, batch: Batch, channel: str, noise_var: float,
                   rng: np.random.Generator) -> tuple[np.ndarray, "TransceiveStats"]:
        """Inference pass for a batch; returns decoded ids and ACT cycle statistics."""
        mask = batch.mask
        enc = self.encode(batch.ids, mask)
        memory = self.transmit(enc.features, mask, channel, noise_var, rng)
        ids, dec_cycles = self.greedy_decode(memory, mask, batch.lengths)
        emitted = ids != PAD
        enc_cycles = enc.act.cycles if enc.act is not None else np.zeros(batch.ids.shape)
        return ids, TransceiveStats(enc_cycles * mask, mask, dec_cycles, emitted)


@dataclass
class TransceiveStats:
    enc_cycles: np.ndarray
    enc_mask: np.ndarray
    dec_cycles: np.ndarray
    dec_mask: np.ndarray

    def per_sentence(self) -> np.ndarray:
        """Mean cycle count over all encoder and decoder positions of each sentence."""
        tot = self.enc_cycles.sum(axis=1) + (self.dec_cycles * self.dec_mask).sum(axis=1)
        cnt = self.enc_mask.sum(axis=1) + self.dec_mask.sum(axis=1)
        return tot / np.maximum(cnt, 1)

    def per_position(self) -> np.ndarray:
        """Flat array of every valid position's cycle count (encoder then decoder)."""
        return np.concatenate([self.enc_cycles[self.enc_mask > 0], self.dec_cycles[self.dec_mask > 0]])


def total_loss(logits: Tensor, targets: np.ndarray, target_mask: np.ndarray,
               act_results: list[ACTResult | None], model: SemanticCodec | None = None,
               ponder_weight: float | None = None, loss_kind: str | None = None,
               ponder_reduce: str | None = None) -> LossParts:
    """Cross-entropy over non-pad targets plus the weighted ponder cost of every ACT stack."""
    cfg = model.config if model is not None else None
    tau = ponder_weight if ponder_weight is not None else (cfg.ponder_weight if cfg else 1.0)
    kind = loss_kind or (cfg.loss if cfg else "ce")
    reduce = ponder_reduce or (cfg.ponder_reduce if cfg else "mean")
    if np.asarray(target_mask).sum() <= 0:
        raise ValueError("total_loss: empty target")
    if kind == "ce":
        ce = ops.cross_entropy(logits, targets, target_mask)
    else:
        ce = ops.binary_cross_entropy_words(logits, targets, target_mask)
    ponder = ops.const(0.0, dtype=logits.data.dtype)
    cycles = []
    for res in act_results:
        if res is None:
            cycles.append(0.0)
            continue
        term = ops.sum(res.ponder)
        if reduce == "mean":
            term = term * (1.0 / max(int(res.valid.sum()), 1))
        ponder = ponder + term
        cycles.append(float((res.cycles * res.valid).sum() / max(res.valid.sum(), 1)))
    total = ce + ponder * tau
    while len(cycles) < 2:
        cycles.append(0.0)
    return LossParts(total=total, ce=ce, ponder=ponder, enc_cycles=cycles[0], dec_cycles=cycles[1])
