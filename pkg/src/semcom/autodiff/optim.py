"""Parameter groups and first-order optimizers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class ParamGroup:
    name: str
    params: dict[str, Tensor]
    learning_rate: float

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"group {self.name!r}: learning rate must be >= 0, got {self.learning_rate}")


def _check_groups(groups: list[ParamGroup]) -> None:
    seen_names: set[str] = set()
    seen_ids: set[int] = set()
    for group in groups:
        for name, p in group.params.items():
            if name in seen_names:
                raise ValueError(f"parameter name {name!r} appears in more than one group")
            if id(p) in seen_ids:
                raise ValueError(f"tensor {name!r} is registered in more than one group")
            seen_names.add(name)
            seen_ids.add(id(p))


def _require_grads(groups: list[ParamGroup]) -> None:
    for group in groups:
        for name, p in group.params.items():
            if p.grad is None:
                raise ValueError(f"no gradient for trainable tensor {name!r} (group {group.name!r})")


def zero_grads(groups: list[ParamGroup]) -> None:
    for group in groups:
        for p in group.params.values():
            p.grad = None


def global_grad_norm(groups: list[ParamGroup]) -> float:
    total = 0.0
    for group in groups:
        for p in group.params.values():
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return total ** 0.5


def clip_grad_norm(groups: list[ParamGroup], max_norm: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``."""
    norm = global_grad_norm(groups)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for group in groups:
            for p in group.params.values():
                if p.grad is not None:
                    p.grad *= scale
    return norm


def sgd_step(groups: list[ParamGroup]) -> None:
    """Plain SGD, ``p <- p - lr * grad``, per-group rate; gradients are zeroed."""
    _check_groups(groups)
    _require_grads(groups)
    for group in groups:
        lr = group.learning_rate
        for p in group.params.values():
            p.data -= (lr * p.grad).astype(p.data.dtype)
            p.grad = None


class SGD:
    """SGD with optional momentum. ``momentum=0`` reproduces :func:`sgd_step`."""

    def __init__(self, groups: list[ParamGroup], momentum: float = 0.0):
        _check_groups(groups)
        self.groups = groups
        self.momentum = momentum
        self._velocity: dict[int, np.ndarray] = {}

    def step(self) -> None:
        if self.momentum == 0.0:
            sgd_step(self.groups)
            return
        _require_grads(self.groups)
        for group in self.groups:
            for p in group.params.values():
                v = self._velocity.get(id(p))
                v = p.grad.copy() if v is None else self.momentum * v + p.grad
                self._velocity[id(p)] = v
                p.data -= (group.learning_rate * v).astype(p.data.dtype)
                p.grad = None


class Adam:
    def __init__(self, groups: list[ParamGroup], betas=(0.9, 0.999), eps: float = 1e-8):
        _check_groups(groups)
        self.groups = groups
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def step(self) -> None:
        _require_grads(self.groups)
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for group in self.groups:
            lr = group.learning_rate
            for p in group.params.values():
                g = p.grad
                m = self._m.get(id(p))
                v = self._v.get(id(p))
                if m is None:
                    m = np.zeros_like(p.data)
                    v = np.zeros_like(p.data)
                m = self.b1 * m + (1.0 - self.b1) * g
                v = self.b2 * v + (1.0 - self.b2) * g * g
                self._m[id(p)], self._v[id(p)] = m, v
                p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)
                p.grad = None


def make_optimizer(kind: str, groups: list[ParamGroup], momentum: float = 0.9):
    if kind == "sgd":
        return SGD(groups)
    if kind == "momentum":
        return SGD(groups, momentum=momentum)
    if kind == "adam":
        return Adam(groups)
    raise ValueError(f"unknown optimizer {kind!r} (expected sgd, momentum or adam)")
