"""Model hyperparameters and the flat ``key=value`` config format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class UTConfig:
    vocab_size: int
    d_model: int = 128
    heads: int = 8
    ffn_inner: int = 512
    max_cycles: int = 5
    act_threshold: float = 0.9
    k_symbols: int = 8
    channel_hidden: int = 256
    dropout: float = 0.1
    max_len: int = 64
    # ACT on: weight-tied block with adaptive halting. ACT off: `layers` fixed
    # cycles, untied per layer unless `tied` is set.
    act: bool = True
    layers: int = 3
    tied: bool = True
    ponder_weight: float = 1.0
    ponder_reduce: str = "mean"       # mean | sum over positions
    loss: str = "ce"                  # ce | bce (word-wise binary form)
    act_output: str = "sum"           # sum | interpolate
    halt_bias_init: float = 1.0
    power_norm: str = "batch"         # batch | sentence
    # activation of the last channel-encoder and channel-decoder layers
    channel_activation: str = "relu"  # relu | linear

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ValueError(f"d_model={self.d_model} must be divisible by heads={self.heads}")
        if not 0.0 <= self.act_threshold <= 1.0:
            raise ValueError(f"act_threshold must lie in [0, 1], got {self.act_threshold}")
        if self.max_cycles < 1 or self.k_symbols < 1 or self.layers < 1:
            raise ValueError("max_cycles, k_symbols and layers must be >= 1")
        if self.vocab_size < 5:
            raise ValueError(f"vocab_size must be >= 5, got {self.vocab_size}")
        if self.ponder_reduce not in ("mean", "sum"):
            raise ValueError(f"ponder_reduce must be mean or sum, got {self.ponder_reduce!r}")
        if self.loss not in ("ce", "bce"):
            raise ValueError(f"loss must be ce or bce, got {self.loss!r}")
        if self.power_norm not in ("batch", "sentence"):
            raise ValueError(f"power_norm must be batch or sentence, got {self.power_norm!r}")
        if self.channel_activation not in ("relu", "linear"):
            raise ValueError(f"channel_activation must be relu or linear, got {self.channel_activation!r}")

    @property
    def depth(self) -> int:
        """Number of block applications per side (upper bound under ACT)."""
        return self.max_cycles if self.act else self.layers

    @property
    def untied(self) -> bool:
        return not self.act and not self.tied

    def replace(self, **changes) -> "UTConfig":
        return dataclasses.replace(self, **changes)


def _coerce(kind, raw: str):
    if kind in (bool, "bool"):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind in (int, "int"):
        return int(raw)
    if kind in (float, "float"):
        return float(raw)
    return raw.strip()


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def dataclass_from_kv(cls, values: dict[str, str], strict: bool = True):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            if strict:
                raise ValueError(f"unknown {cls.__name__} key {key!r}")
            continue
        kwargs[key] = _coerce(known[key].type, raw)
    return cls(**kwargs)


def dataclass_to_kv(obj) -> str:
    lines = []
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> UTConfig:
    return dataclass_from_kv(UTConfig, parse_kv(Path(path).read_text()))


def save_config(cfg: UTConfig, path) -> None:
    Path(path).write_text(dataclass_to_kv(cfg))
