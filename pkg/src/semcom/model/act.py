"""Adaptive computation time: per-position halting around a recurrent block."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autodiff import Tensor, ops

# step(t, state) -> (state with coordinates added, block output)
StepFn = Callable[[int, Tensor], tuple[Tensor, Tensor]]
# halting(pre_state, t) -> probabilities shaped [..., 1]
HaltFn = Callable[[Tensor, int], Tensor]


@dataclass
class ACTResult:
    output: Tensor
    ponder: Tensor            # R + N per position, zero on padding; shape [B, L]
    remainders: Tensor        # [B, L]
    cycles: np.ndarray        # N per position, [B, L]
    valid: np.ndarray         # [B, L] bool
    weights: list[np.ndarray] = field(default_factory=list)   # W_t per step, [B, L]
    states: list[np.ndarray] = field(default_factory=list)    # block outputs x_t, when traced

    def mean_cycles_per_sentence(self) -> np.ndarray:
        n = self.valid.sum(axis=1)
        return (self.cycles * self.valid).sum(axis=1) / np.maximum(n, 1)


def act_run(
    x: Tensor,
    step: StepFn,
    halting: HaltFn,
    threshold: float = 0.9,
    max_cycles: int = 5,
    valid: np.ndarray | None = None,
    output_mode: str = "sum",
    trace: bool = False,
) -> ACTResult:
    """Run ``step`` until every valid position has halted or ``max_cycles`` is hit.

    Per cycle ``t`` a position that is still running either keeps going
    (weight ``p_t``) or halts (weight = remainder ``1 - h``).  Cycle ``m``
    forces every remaining position to halt, so the weights of each valid
    position sum to one.  ``output_mode="sum"`` returns ``sum_t W_t x_t``;
    ``"interpolate"`` uses the running update ``y <- y (1 - W) + x W``.
    Padding positions never run and get zero output and zero ponder cost.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"halting threshold must be in [0, 1], got {threshold}")
    if max_cycles < 1:
        raise ValueError(f"max_cycles must be >= 1, got {max_cycles}")
    if output_mode not in ("sum", "interpolate"):
        raise ValueError(f"unknown output_mode {output_mode!r}")
    b, n = x.shape[:2]
    dtype = x.data.dtype
    valid = np.ones((b, n), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)

    running = valid[..., None].copy()
    cycles = np.zeros((b, n, 1), dtype=dtype)
    halt_accum: Tensor = ops.const(np.zeros((b, n, 1)), dtype=dtype)
    remainders: Tensor = ops.const(np.zeros((b, n, 1)), dtype=dtype)
    y: Tensor = ops.const(np.zeros(x.shape), dtype=dtype)
    state = x
    weights, states = [], []

    for t in range(max_cycles):
        if not running.any():
            break
        pre, new_state = step(t, state)
        p = halting(pre, t)
        still = running.astype(dtype)
        if t == max_cycles - 1:
            halted_now = still
        else:
            halted_now = ((halt_accum.data + p.data * still) > threshold).astype(dtype) * still
        keep_going = still * (1.0 - halted_now)

        halt_accum = halt_accum + p * keep_going
        remainders = remainders + ops.const(halted_now) * (1.0 - halt_accum)
        halt_accum = halt_accum + remainders * halted_now
        cycles += keep_going + halted_now
        w = p * keep_going + remainders * halted_now

        if output_mode == "sum":
            y = y + new_state * w
        else:
            y = y * (1.0 - w) + new_state * w
        state = new_state
        running &= halted_now == 0
        if trace:
            weights.append(w.data[..., 0].copy())
            states.append(new_state.data.copy())

    mask = ops.const(valid[..., None].astype(dtype))
    ponder = ops.reshape((remainders + ops.const(cycles)) * mask, (b, n))
    return ACTResult(
        output=y,
        ponder=ponder,
        remainders=ops.reshape(remainders, (b, n)),
        cycles=cycles[..., 0],
        valid=valid,
        weights=weights,
        states=states,
    )
