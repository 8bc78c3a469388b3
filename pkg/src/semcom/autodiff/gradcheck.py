"""Central finite-difference check of reverse-mode gradients, replayed in float64."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tape, Tensor, backward, precision


def gradcheck(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-3,
    max_entries: int | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """Return the norm-wise relative error per parameter.

    ``fn`` must rebuild the scalar loss from ``params`` on every call and be
    deterministic (fixed noise, no dropout). The parameters are cast to
    float64 for the replay and restored afterwards. When ``max_entries`` is
    set, at most that many entries per tensor are probed.
    """
    originals = {name: p.data for name, p in params.items()}
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    try:
        for p in params.values():
            p.data = p.data.astype(np.float64)
            p.grad = None
            p.requires_grad = True
        with precision(np.float64):
            tape = Tape()
            with tape:
                loss = fn()
            backward(loss, tape)
            analytic = {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
                        for name, p in params.items()}
            for name, p in params.items():
                flat = p.data.reshape(-1)
                idx = np.arange(flat.size)
                if max_entries is not None and flat.size > max_entries:
                    idx = rng.choice(flat.size, size=max_entries, replace=False)
                numeric = np.empty(idx.size)
                for j, i in enumerate(idx):
                    keep = flat[i]
                    flat[i] = keep + h
                    up = float(fn().data)
                    flat[i] = keep - h
                    down = float(fn().data)
                    flat[i] = keep
                    numeric[j] = (up - down) / (2.0 * h)
                a = analytic[name].reshape(-1)[idx]
                # below the floor the comparison is absolute: exact-zero gradients
                # (e.g. attention key biases) would otherwise divide noise by noise
                denom = max(np.linalg.norm(a), np.linalg.norm(numeric), 1e-6)
                errors[name] = float(np.linalg.norm(a - numeric) / denom)
    finally:
        for name, p in params.items():
            p.data = originals[name]
            p.grad = None
    return errors
