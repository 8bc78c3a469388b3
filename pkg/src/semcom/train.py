"""End-to-end training loop, evaluation and checkpoint I/O."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape, backward, clip_grad_norm, make_optimizer, read_tensors, write_tensors
from .autodiff.checkpoint import CheckpointError
from .channel import snr_to_noise_var
from .metrics import EvalRecord, evaluate_text
from .model import SemanticCodec, UTConfig
from .model.config import dataclass_from_kv, dataclass_to_kv, load_config, parse_kv, save_config
from .seeding import derived_rng
from .text import END, PAD, START, Batch, TokenizedSentence, Vocabulary, decode_tokens, make_batches

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


# ------------------------------------------------------------------ SNR regimes

@dataclass(frozen=True)
class SNRRegime:
    kind: str          # fixed | uniform
    low: float
    high: float

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ValueError(f"unknown SNR regime {self.kind!r}")
        if self.low > self.high:
            raise ValueError(f"SNR regime bounds reversed: {self.low} > {self.high}")

    @classmethod
    def fixed(cls, db: float) -> "SNRRegime":
        return cls("fixed", db, db)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "SNRRegime":
        return cls("uniform", lo, hi)

    @classmethod
    def parse(cls, text: str) -> "SNRRegime":
        """``fixed:10`` or ``uniform:0,10``."""
        kind, _, args = text.partition(":")
        vals = [float(v) for v in args.replace(",", " ").split()]
        if kind == "fixed" and len(vals) == 1:
            return cls.fixed(vals[0])
        if kind == "uniform" and len(vals) == 2:
            return cls.uniform(*vals)
        raise ValueError(f"cannot parse SNR regime {text!r} (use fixed:DB or uniform:LO,HI)")

    def __str__(self) -> str:
        return f"fixed:{self.low:g}" if self.kind == "fixed" else f"uniform:{self.low:g},{self.high:g}"


def sample_train_snr(regime: SNRRegime, rng: np.random.Generator) -> float:
    if regime.kind == "fixed":
        return float(regime.low)
    return float(rng.uniform(regime.low, regime.high))


# ------------------------------------------------------------------ config

@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    lr_main: float = 1e-6
    lr_act: float = 1e-4
    optimizer: str = "sgd"          # sgd | momentum | adam
    train_snr: str = "uniform:0,10"
    channel: str = "awgn"
    seed: int = 0
    grad_clip: float = 1.0
    # multiplier on both group rates: linear ramp over warmup_steps, then
    # constant or cosine decay to zero at the last step
    warmup_steps: int = 0
    lr_schedule: str = "constant"   # constant | cosine
    checkpoint: str = ""
    eval_snr: float = 10.0
    log_every: int = 50

    def __post_init__(self):
        if self.lr_main < 0 or self.lr_act < 0:
            raise ValueError("learning rates must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"lr_schedule must be constant or cosine, got {self.lr_schedule!r}")
        SNRRegime.parse(self.train_snr)

    @property
    def regime(self) -> SNRRegime:
        return SNRRegime.parse(self.train_snr)


def load_run_config(path) -> tuple[UTConfig | None, TrainConfig, dict[str, str]]:
    """Split a flat config file into model keys (``model.*``), train keys and the rest."""
    raw = parse_kv(Path(path).read_text())
    model_kv = {k[6:]: v for k, v in raw.items() if k.startswith("model.")}
    train_kv = {k: v for k, v in raw.items() if not k.startswith("model.") and not k.startswith("data.")}
    data_kv = {k[5:]: v for k, v in raw.items() if k.startswith("data.")}
    model_kv.setdefault("vocab_size", "5")
    ut = dataclass_from_kv(UTConfig, model_kv) if len(model_kv) > 1 else None
    return ut, dataclass_from_kv(TrainConfig, train_kv), data_kv


# ------------------------------------------------------------------ training

def lr_factor(step: int, total_steps: int, warmup_steps: int = 0, schedule: str = "constant") -> float:
    """Learning-rate multiplier for 0-based ``step`` out of ``total_steps``."""
    factor = 1.0
    if warmup_steps:
        factor = min(1.0, (step + 1) / warmup_steps)
    if schedule == "cosine" and total_steps > 0:
        factor *= 0.5 * (1.0 + math.cos(math.pi * min(step, total_steps) / total_steps))
    return factor


@dataclass
class StepStats:
    total: float
    ce: float
    ponder: float
    mean_cycles: float
    snr_db: float


@dataclass
class History:
    steps: list[StepStats] = field(default_factory=list)
    epoch_loss: list[float] = field(default_factory=list)
    seconds: float = 0.0


def train_step(batch: Batch, model: SemanticCodec, optimizer, groups, channel: str, snr_db: float,
               rng: np.random.Generator, grad_clip: float = 1.0) -> StepStats:
    """One forward/backward/update pass on ``batch``."""
    tape = Tape()
    with tape:
        parts = model.loss(batch, channel, snr_to_noise_var(snr_db), rng)
    if not np.isfinite(parts.total.data):
        raise TrainingDiverged(f"non-finite loss {float(parts.total.data)}")
    backward(parts.total, tape)
    tape.clear()
    if grad_clip > 0:
        clip_grad_norm(groups, grad_clip)
    optimizer.step()
    return StepStats(float(parts.total.data), float(parts.ce.data), float(parts.ponder.data),
                     parts.mean_cycles, snr_db)


def train(model: SemanticCodec, sentences: list[TokenizedSentence], cfg: TrainConfig,
          vocab: Vocabulary | None = None, valid: list[TokenizedSentence] | None = None,
          max_steps: int | None = None) -> History:
    """Train ``model`` in place.

    With a checkpoint path the latest weights are written every epoch; when a
    validation set is given the best BLEU-1 (at ``eval_snr``) is also kept at
    ``<checkpoint>.best``.
    """
    groups = model.param_groups(cfg.lr_main, cfg.lr_act)
    base_rates = [g.learning_rate for g in groups]
    optimizer = make_optimizer(cfg.optimizer, groups)
    per_epoch = -(-len(sentences) // cfg.batch_size)
    total_steps = cfg.epochs * per_epoch if max_steps is None else min(max_steps, cfg.epochs * per_epoch)
    regime = cfg.regime
    model.train()
    hist = History()
    start = time.perf_counter()
    best = -1.0
    last_good = None
    step = 0
    for epoch in range(cfg.epochs):
        batches = make_batches(sentences, cfg.batch_size, seed=cfg.seed * 1000003 + epoch)
        losses = []
        for batch in batches:
            rng = derived_rng(cfg.seed, epoch, step)
            snr = sample_train_snr(regime, rng)
            factor = lr_factor(step, total_steps, cfg.warmup_steps, cfg.lr_schedule)
            for group, rate in zip(groups, base_rates):
                group.learning_rate = rate * factor
            try:
                stats = train_step(batch, model, optimizer, groups, cfg.channel, snr, rng, cfg.grad_clip)
            except (TrainingDiverged, FloatingPointError) as exc:
                raise TrainingDiverged(f"epoch {epoch} step {step}: {exc}; last good checkpoint: {last_good}") from exc
            hist.steps.append(stats)
            losses.append(stats.total)
            step += 1
            if cfg.log_every and step % cfg.log_every == 0:
                log.info("step %d epoch %d loss %.4f ce %.4f ponder %.3f cycles %.2f",
                         step, epoch, stats.total, stats.ce, stats.ponder, stats.mean_cycles)
            if max_steps is not None and step >= max_steps:
                break
        hist.epoch_loss.append(float(np.mean(losses)) if losses else float("nan"))
        if cfg.checkpoint:
            checkpoint_save(model, cfg.checkpoint, vocab)
            last_good = cfg.checkpoint
            if valid:
                model.eval()
                rec = evaluate_model(model, valid, [cfg.eval_snr], cfg.channel, seed=cfg.seed)[0]
                model.train()
                if rec.bleu1 > best:
                    best = rec.bleu1
                    checkpoint_save(model, cfg.checkpoint + ".best", vocab)
        if max_steps is not None and step >= max_steps:
            break
    model.eval()
    hist.seconds = time.perf_counter() - start
    return hist


# ------------------------------------------------------------------ evaluation

@dataclass
class PointResult:
    snr_db: float
    record: EvalRecord
    sentence_cycles: np.ndarray      # mean cycles per sentence
    position_cycles: np.ndarray      # every valid position's cycle count
    lengths: np.ndarray
    candidates: list[list[str]]


def evaluate_point(model: SemanticCodec, dataset: list[TokenizedSentence], snr_db: float, channel: str,
                   seed: int, index: int = 0, batch_size: int = 64, vocab: Vocabulary | None = None) -> PointResult:
    """Greedy transceive of ``dataset`` at one SNR with the stream ``derived_rng(seed, index)``."""
    if not dataset:
        raise ValueError("cannot evaluate on an empty dataset")
    rng = derived_rng(seed, index)
    nv = snr_to_noise_var(snr_db)
    cands: list[list[str] | None] = [None] * len(dataset)
    sent_cycles = np.zeros(len(dataset))
    pos_cycles = []
    lengths = np.array([s.length for s in dataset])

    def words(ids):
        if vocab is not None:
            return decode_tokens(vocab, ids)
        return [str(i) for i in decode_tokens_raw(ids)]

    for batch in make_batches(dataset, batch_size, seed=0):
        ids, stats = model.transceive(batch, channel, nv, rng)
        per_sent = stats.per_sentence()
        for r, i in enumerate(batch.index):
            cands[i] = words(ids[r])
            sent_cycles[i] = per_sent[r]
        pos_cycles.append(stats.per_position())
    refs = [words(s.ids + [END]) for s in dataset]
    record = evaluate_text(cands, refs, mean_cycles=float(sent_cycles.mean()))
    return PointResult(snr_db, record, sent_cycles, np.concatenate(pos_cycles), lengths, cands)


def decode_tokens_raw(ids) -> list[int]:
    """Content ids up to the first ``<END>`` (for evaluation without a vocabulary)."""
    out = []
    for i in ids:
        i = int(i)
        if i == END:
            break
        if i in (PAD, START):
            continue
        out.append(i)
    return out


def evaluate_points(model: SemanticCodec, dataset, snr_list, channel: str, seed: int = 0,
                    workers: int = 1, batch_size: int = 64, vocab: Vocabulary | None = None) -> list[PointResult]:
    model.eval()
    jobs = [(i, float(s)) for i, s in enumerate(snr_list)]
    if workers <= 1:
        return [evaluate_point(model, dataset, s, channel, seed, i, batch_size, vocab) for i, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(evaluate_point, model, dataset, s, channel, seed, i, batch_size, vocab)
                   for i, s in jobs]
        return [f.result() for f in futures]


def evaluate_model(model: SemanticCodec, dataset, snr_list, channel: str = "awgn", seed: int = 0,
                   workers: int = 1, batch_size: int = 64, vocab: Vocabulary | None = None) -> list[EvalRecord]:
    """One :class:`EvalRecord` per SNR point (greedy decoding, deterministic per seed)."""
    return [p.record for p in evaluate_points(model, dataset, snr_list, channel, seed, workers, batch_size, vocab)]


# ------------------------------------------------------------------ checkpoints

def _sidecar(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.name + suffix)


def checkpoint_save(model: SemanticCodec, path, vocab: Vocabulary | None = None) -> None:
    """Write weights (SCUT container), the model config (``.cfg``) and optionally the vocabulary (``.vocab``)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_tensors(path, model.state_dict())
    save_config(model.config, _sidecar(path, ".cfg"))
    if vocab is not None:
        vocab.save(_sidecar(path, ".vocab"))


def checkpoint_load(path, model: SemanticCodec | None = None) -> SemanticCodec:
    """Load weights into ``model`` (or a model built from the ``.cfg`` sidecar).

    Rejects bad magic/version, truncation, unknown tensor names and shape
    mismatches (naming the offending tensor).
    """
    state = read_tensors(path)
    if model is None:
        cfg_path = _sidecar(path, ".cfg")
        if not cfg_path.exists():
            raise CheckpointError(f"{path}: no model config sidecar {cfg_path}")
        model = SemanticCodec(load_config(cfg_path))
    model.load_state_dict(state)
    return model.eval()


def load_vocab_for(path) -> Vocabulary | None:
    p = _sidecar(path, ".vocab")
    return Vocabulary.load(p) if p.exists() else None


def config_text(cfg) -> str:
    return dataclass_to_kv(cfg)
