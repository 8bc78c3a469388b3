"""Differentiable primitives over :class:`Tensor`.

Every op computes its forward value with numpy and registers a closure that
maps the upstream gradient to one gradient per input (``None`` when an input
is a constant).
"""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, get_default_dtype, make_op


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_op(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_op(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def back(g):
        ga = _unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_op(ad * bd, (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def back(g):
        ga = _unbroadcast(g / bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * ad / (bd * bd), bd.shape) if b.requires_grad else None
        return ga, gb

    return make_op(ad / bd, (a, b), back)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_op(-a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_op(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return make_op(np.log(ad), (a,), lambda g: (g / ad,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_op(out, (a,), lambda g: (g * 0.5 / out,))


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return make_op(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return make_op(np.where(pos, a.data, 0).astype(a.data.dtype), (a,), lambda g: (g * pos,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return make_op(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_op(out, (a,), lambda g: (g * (1.0 - out * out),))


# ---------------------------------------------------------------- reductions

def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_op(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), back)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if np.isscalar(axis) else axis
        n = int(np.prod([a.shape[i] for i in axes]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


# ---------------------------------------------------------------- shape ops

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return make_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return make_op(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    shape, dtype = a.shape, a.data.dtype

    def back(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, index, g)
        return (out,)

    return make_op(np.array(a.data[index]), (a,), back)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_op(np.stack([t.data for t in tensors], axis=axis), tensors, back)


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting on leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2 or ad.shape[-1] != bd.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}")

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        if b.requires_grad:
            if bd.ndim == 2 and ad.ndim > 2:
                # fold batch dims into rows: one big GEMM instead of a batched one
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return make_op(ad @ bd, (a, b), back)


def linear(x, weight, bias=None) -> Tensor:
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


# ---------------------------------------------------------------- fused nn ops

def softmax(x, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max-subtracted) along ``axis``."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_op(out, (x,), back)


def softmax_rows(x) -> Tensor:
    return softmax(x, axis=-1)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def back(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_op(out, (x,), back)


def layer_norm(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if x.shape[-1] != gain.shape[-1] or gain.shape != bias.shape:
        raise ValueError(f"layer_norm: last dim {x.shape[-1]} vs gain {gain.shape}, bias {bias.shape}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    d = xd.shape[-1]

    def back(g):
        gg = _unbroadcast(g * xhat, gain.shape) if gain.requires_grad else None
        gb = _unbroadcast(g, bias.shape) if bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gh = g * gain.data
            gx = inv / d * (d * gh - gh.sum(axis=-1, keepdims=True)
                            - xhat * (gh * xhat).sum(axis=-1, keepdims=True))
        return gx, gg, gb

    return make_op(xhat * gain.data + bias.data, (x, gain, bias), back)


def embedding(weight, ids) -> Tensor:
    """Row gather ``weight[ids]``; ``ids`` is an integer array."""
    weight = as_tensor(weight)
    ids = np.asarray(ids)
    shape, dtype = weight.shape, weight.data.dtype

    def back(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, shape[-1]))
        return (out,)

    return make_op(weight.data[ids], (weight,), back)


def dropout(x, rate: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    x = as_tensor(x)
    if not training or rate <= 0.0 or rng is None:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.data.dtype) / keep
    return mul(x, Tensor._from_op(mask))


def cross_entropy(logits, targets, mask=None, reduction: str = "mean") -> Tensor:
    """Categorical cross-entropy of integer ``targets`` under ``logits``.

    ``mask`` (same shape as targets) selects the positions that count; the
    mean is taken over selected positions only.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    v = logits.shape[-1]
    flat = logits.data.reshape(-1, v)
    t = targets.reshape(-1)
    m = np.ones(t.shape, dtype=flat.dtype) if mask is None else np.asarray(mask, dtype=flat.dtype).reshape(-1)
    count = m.sum()
    if count <= 0:
        raise ValueError("cross_entropy: no target positions selected")
    z = flat - flat.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    nll = -logp[np.arange(t.size), t] * m
    scale = 1.0 / count if reduction == "mean" else 1.0
    value = np.asarray(nll.sum() * scale, dtype=flat.dtype)

    def back(g):
        p = np.exp(logp)
        p[np.arange(t.size), t] -= 1.0
        p *= (m * scale * g)[:, None]
        return (p.reshape(logits.shape),)

    return make_op(value, (logits,), back)


def binary_cross_entropy_words(logits, targets, mask=None) -> Tensor:
    """Word-wise binary CE: -sum_v [q log p + (1-q) log(1-p)] with one-hot q.

    ``p`` is the softmax over the dictionary; averaged over selected positions.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    v = logits.shape[-1]
    dtype = logits.data.dtype
    onehot = np.zeros(targets.shape + (v,), dtype=dtype)
    np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
    m = np.ones(targets.shape, dtype=dtype) if mask is None else np.asarray(mask, dtype=dtype)
    p = softmax(logits)
    tiny = np.finfo(dtype).tiny
    one_minus = sub(1.0 + tiny, p)
    terms = add(mul(onehot, log(add(p, tiny))), mul(1.0 - onehot, log(one_minus)))
    per_pos = sum(terms, axis=-1)
    return neg(sum(mul(per_pos, m)) * (1.0 / m.sum()))


def const(x, dtype=None) -> Tensor:
    """Wrap ``x`` as a non-trainable tensor without copying when possible."""
    return Tensor._from_op(np.asarray(x, dtype=dtype or get_default_dtype()))
