"""Dense layers, attention and the shared transformer blocks."""
from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor, ops

NEG_INF = -1e9


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Registry:
    """Flat ``name -> Tensor`` parameter store shared by all sub-layers of a model."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def weight(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        return self.add(name, uniform_init(self.rng, (fan_in, fan_out), fan_in))

    def zeros(self, name: str, *shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def ones(self, name: str, *shape) -> Tensor:
        return self.add(name, np.ones(shape))

    def full(self, name: str, value: float, *shape) -> Tensor:
        return self.add(name, np.full(shape, value))


class Dense:
    def __init__(self, reg: Registry, name: str, n_in: int, n_out: int,
                 activation: str | None = None, bias_init: float = 0.0):
        self.w = reg.weight(f"{name}.w", n_in, n_out)
        self.b = reg.full(f"{name}.b", bias_init, n_out)
        self.activation = activation

    def __call__(self, x) -> Tensor:
        y = ops.linear(x, self.w, self.b)
        if self.activation == "relu":
            return ops.relu(y)
        if self.activation == "sigmoid":
            return ops.sigmoid(y)
        return y


class LayerNorm:
    def __init__(self, reg: Registry, name: str, d: int, eps: float = 1e-6):
        self.gain = reg.ones(f"{name}.gain", d)
        self.bias = reg.zeros(f"{name}.bias", d)
        self.eps = eps

    def __call__(self, x) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


def padding_bias(key_mask: np.ndarray, dtype) -> np.ndarray:
    """Additive attention bias [B,1,1,Lk] that removes padded keys."""
    return np.where(key_mask[:, None, None, :] > 0, 0.0, NEG_INF).astype(dtype)


def causal_bias(length: int, dtype) -> np.ndarray:
    """Additive bias [1,1,L,L] hiding future positions."""
    future = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(future, NEG_INF, 0.0).astype(dtype)[None, None]


class MultiHeadAttention:
    def __init__(self, reg: Registry, name: str, d_model: int, heads: int):
        if d_model % heads:
            raise ValueError(f"d_model={d_model} not divisible by heads={heads}")
        self.heads = heads
        self.d_head = d_model // heads
        self.q = Dense(reg, f"{name}.q", d_model, d_model)
        self.k = Dense(reg, f"{name}.k", d_model, d_model)
        self.v = Dense(reg, f"{name}.v", d_model, d_model)
        self.o = Dense(reg, f"{name}.o", d_model, d_model)

    def _split(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        return x.reshape(b, n, self.heads, self.d_head).transpose(0, 2, 1, 3)

    def weights(self, query, keys, bias: np.ndarray | None = None) -> Tensor:
        q = self._split(self.q(query))
        k = self._split(self.k(keys))
        scores = ops.matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.d_head))
        if bias is not None:
            b, _, lq, lk = scores.shape
            if bias.ndim != 4 or bias.shape[-1] != lk or bias.shape[-2] not in (1, lq) or bias.shape[0] not in (1, b):
                raise ValueError(f"attention mask shape {bias.shape} does not fit scores {scores.shape}")
            scores = scores + ops.const(bias, dtype=scores.data.dtype)
        return ops.softmax(scores, axis=-1)

    def __call__(self, query, keys, values=None, bias: np.ndarray | None = None) -> Tensor:
        values = keys if values is None else values
        attn = self.weights(query, keys, bias)
        ctx = ops.matmul(attn, self._split(self.v(values)))
        b, _, n, _ = ctx.shape
        return self.o(ctx.transpose(0, 2, 1, 3).reshape(b, n, self.heads * self.d_head))


def sinusoid(positions: np.ndarray, d: int) -> np.ndarray:
    """Sinusoidal signal: sin on the first half of channels, cos on the second."""
    half = d // 2
    inv = 1.0 / (10000.0 ** (np.arange(half) / max(half - 1, 1)))
    angles = positions[:, None] * inv[None, :]
    sig = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    if d % 2:
        sig = np.pad(sig, ((0, 0), (0, 1)))
    return sig


class CoordinateEmbedding:
    """Position signal plus a per-cycle timestep signal, added at every cycle."""

    def __init__(self, d_model: int, max_len: int, max_steps: int):
        self.position = sinusoid(np.arange(max_len, dtype=np.float64), d_model)
        self.step = sinusoid(np.arange(max_steps, dtype=np.float64), d_model)

    def __call__(self, x: Tensor, step: int) -> Tensor:
        n = x.shape[1]
        if n > self.position.shape[0]:
            raise ValueError(f"sequence length {n} exceeds supported length {self.position.shape[0]}")
        sig = self.position[:n] + self.step[step][None, :]
        return x + ops.const(sig[None], dtype=x.data.dtype)


class EncoderBlock:
    """Self-attention and feed-forward sublayers, each with residual + layer norm."""

    def __init__(self, reg: Registry, name: str, d_model: int, heads: int, ffn_inner: int, dropout: float):
        self.attn = MultiHeadAttention(reg, f"{name}.attn", d_model, heads)
        self.ln1 = LayerNorm(reg, f"{name}.ln1", d_model)
        self.ff1 = Dense(reg, f"{name}.ff1", d_model, ffn_inner, "relu")
        self.ff2 = Dense(reg, f"{name}.ff2", ffn_inner, d_model)
        self.ln2 = LayerNorm(reg, f"{name}.ln2", d_model)
        self.dropout = dropout

    def __call__(self, x, self_bias, rng=None, training=False) -> Tensor:
        a = ops.dropout(self.attn(x, x, bias=self_bias), self.dropout, rng, training)
        x = self.ln1(x + a)
        f = ops.dropout(self.ff2(self.ff1(x)), self.dropout, rng, training)
        return self.ln2(x + f)


class DecoderBlock:
    """Causal self-attention, cross-attention to the received features, feed-forward."""

    def __init__(self, reg: Registry, name: str, d_model: int, heads: int, ffn_inner: int, dropout: float):
        self.self_attn = MultiHeadAttention(reg, f"{name}.self_attn", d_model, heads)
        self.ln1 = LayerNorm(reg, f"{name}.ln1", d_model)
        self.cross_attn = MultiHeadAttention(reg, f"{name}.cross_attn", d_model, heads)
        self.ln2 = LayerNorm(reg, f"{name}.ln2", d_model)
        self.ff1 = Dense(reg, f"{name}.ff1", d_model, ffn_inner, "relu")
        self.ff2 = Dense(reg, f"{name}.ff2", ffn_inner, d_model)
        self.ln3 = LayerNorm(reg, f"{name}.ln3", d_model)
        self.dropout = dropout

    def __call__(self, x, memory, self_bias, cross_bias, rng=None, training=False) -> Tensor:
        a = ops.dropout(self.self_attn(x, x, bias=self_bias), self.dropout, rng, training)
        x = self.ln1(x + a)
        c = ops.dropout(self.cross_attn(x, memory, bias=cross_bias), self.dropout, rng, training)
        x = self.ln2(x + c)
        f = ops.dropout(self.ff2(self.ff1(x)), self.dropout, rng, training)
        return self.ln3(x + f)
