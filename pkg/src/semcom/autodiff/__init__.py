from . import ops
from .checkpoint import CheckpointError, read_tensors, write_tensors
from .gradcheck import gradcheck
from .optim import SGD, Adam, ParamGroup, clip_grad_norm, make_optimizer, sgd_step, zero_grads
from .tensor import (
    NonFiniteError,
    Tape,
    Tensor,
    active_tape,
    backward,
    get_default_dtype,
    no_grad,
    precision,
    set_finite_checks,
)

__all__ = [
    "Adam", "CheckpointError", "NonFiniteError", "ParamGroup", "SGD", "Tape", "Tensor",
    "active_tape", "backward", "clip_grad_norm", "get_default_dtype", "gradcheck",
    "make_optimizer", "no_grad", "ops", "precision", "read_tensors", "set_finite_checks",
    "sgd_step", "write_tensors", "zero_grads",
]
