"""Sweep orchestration: SNR, symbols-per-word, ACT cycles, depth comparison, classic baselines.

Every sweep writes a CSV with the fixed header :data:`CSV_HEADER`, rows in a
canonical order, and floats in a fixed format, so identical seeds give
identical bytes whether points run serially or on a thread pool.
"""
from __future__ import annotations

import csv
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, snr_to_noise_var
from .classic.pipeline import run_classic_pipeline
from .metrics import EvalRecord
from .model import SemanticCodec
from .seeding import derive_seed
from .text import TokenizedSentence, Vocabulary, encode_sentence
from .train import checkpoint_load, evaluate_points, load_vocab_for

CSV_HEADER = ["system", "channel", "snr_db", "k_symbols", "bleu1", "bleu2", "bleu3", "bleu4",
              "ser", "mean_cycles", "n_sentences", "seed"]
SWEEP_KINDS = ("bleu_vs_snr", "ser_vs_snr", "symbols_per_word", "train_snr_regimes",
               "cycles_vs_snr", "depth_compare")
CLASSIC_SYSTEMS = ("turbo", "rs")
DEFAULT_GRID = {"awgn": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
                "rayleigh": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0]}


class SweepError(RuntimeError):
    pass


@dataclass
class SweepRow:
    system: str
    channel: str
    snr_db: float
    k_symbols: float
    record: EvalRecord
    seed: int

    def key(self):
        return (self.system, self.channel, self.k_symbols, self.snr_db, self.seed)

    def cells(self) -> list[str]:
        r = self.record
        return [self.system, self.channel, f"{self.snr_db:g}", f"{self.k_symbols:g}",
                f"{r.bleu1:.6f}", f"{r.bleu2:.6f}", f"{r.bleu3:.6f}", f"{r.bleu4:.6f}",
                f"{r.ser:.6f}", f"{r.mean_cycles:.6f}", str(r.n_sentences), str(self.seed)]


@dataclass
class SweepSpec:
    kind: str
    snr_grid: list[float]
    systems: dict[str, str]          # label -> checkpoint path, or "turbo" / "rs"
    dataset: list[list[str]]         # reference sentences as word lists
    channel: str = "awgn"
    seed: int = 0
    out: str = "sweep.csv"
    workers: int = 1
    batch_size: int = 64
    plot: bool = True

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}; choose from {SWEEP_KINDS}")
        if not self.snr_grid:
            raise ValueError("empty SNR grid")
        if not self.systems:
            raise ValueError("no systems selected")
        if not self.dataset:
            raise ValueError("empty evaluation dataset")
        if self.channel not in ("awgn", "rayleigh"):
            raise ValueError(f"unknown channel {self.channel!r}")


def write_rows(rows: list[SweepRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in sorted(rows, key=SweepRow.key):
            w.writerow(row.cells())
    return path


def read_rows(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: header does not match the sweep schema")
        return list(reader)


# ------------------------------------------------------------------ system evaluation

def _load_system(label: str, path: str) -> tuple[SemanticCodec, Vocabulary]:
    if not Path(path).exists():
        raise SweepError(f"missing checkpoint for {label}: {path}")
    model = checkpoint_load(path)
    vocab = load_vocab_for(path)
    if vocab is None:
        raise SweepError(f"checkpoint {path} has no vocabulary sidecar")
    if len(vocab) != model.config.vocab_size:
        raise SweepError(f"{path}: vocabulary size {len(vocab)} != model vocab_size {model.config.vocab_size}")
    return model, vocab


def learned_rows(label: str, model: SemanticCodec, vocab: Vocabulary, spec: SweepSpec, details=None) -> list[SweepRow]:
    data: list[TokenizedSentence] = [encode_sentence(vocab, s) for s in spec.dataset]
    points = evaluate_points(model, data, spec.snr_grid, spec.channel, seed=derive_seed(spec.seed, _label_index(label)),
                             workers=spec.workers, batch_size=spec.batch_size, vocab=vocab)
    if details is not None:
        details[label] = points
    return [SweepRow(label, spec.channel, p.snr_db, model.config.k_symbols, p.record, spec.seed) for p in points]


def _label_index(label: str) -> int:
    # stable across processes (str hash is salted)
    return int.from_bytes(label.encode("utf-8")[:8].ljust(8, b"\0"), "little")


def classic_rows(codec: str, spec: SweepSpec) -> list[SweepRow]:
    """Separate-coding baseline at each grid point; ``k_symbols`` is the measured symbols per word."""
    def point(i: int, snr: float) -> SweepRow:
        cfg = ChannelConfig(spec.channel, snr, seed=spec.seed)
        res = run_classic_pipeline(spec.dataset, codec, cfg, seed=derive_seed(spec.seed, _label_index(codec), i),
                                   noise_var=snr_to_noise_var(snr))
        return SweepRow(codec, spec.channel, float(snr), round(res.symbols_per_word, 4), res.record, spec.seed)

    jobs = list(enumerate(float(s) for s in spec.snr_grid))
    if spec.workers <= 1:
        return [point(i, s) for i, s in jobs]
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        return list(pool.map(lambda job: point(*job), jobs))


def system_rows(spec: SweepSpec, details=None) -> list[SweepRow]:
    rows: list[SweepRow] = []
    for label, path in sorted(spec.systems.items()):
        if path in CLASSIC_SYSTEMS:
            rows += classic_rows(path, spec)
        else:
            model, vocab = _load_system(label, path)
            rows += learned_rows(label, model, vocab, spec, details)
    return rows


def _finish(rows: list[SweepRow], spec: SweepSpec, plot_kind: str) -> Path:
    path = write_rows(rows, spec.out)
    if spec.plot:
        from .plotting import emit_plot
        emit_plot(path, plot_kind)
    return path


# ------------------------------------------------------------------ sweeps

def run_snr_sweep(spec: SweepSpec) -> Path:
    """One row per (system, SNR) for learned checkpoints and classic baselines."""
    kind = spec.kind if spec.kind in ("bleu_vs_snr", "ser_vs_snr", "train_snr_regimes") else "bleu_vs_snr"
    return _finish(system_rows(spec), spec, kind)


def run_baseline(spec: SweepSpec) -> Path:
    for label, path in spec.systems.items():
        if path not in CLASSIC_SYSTEMS:
            raise SweepError(f"baseline system {label} must be one of {CLASSIC_SYSTEMS}, got {path!r}")
    return run_snr_sweep(spec)


def run_symbols_sweep(spec: SweepSpec, checkpoints: dict[int, str]) -> Path:
    """Rows keyed by K, one checkpoint per K; channel-encoder widths must equal 2K."""
    if not checkpoints:
        raise SweepError("no per-K checkpoints given")
    rows = []
    for k, path in sorted(checkpoints.items()):
        model, vocab = _load_system(f"K={k}", path)
        if model.config.k_symbols != k:
            raise SweepError(f"{path}: configured k_symbols={model.config.k_symbols}, expected {k}")
        width = channel_width(model)
        if width != 2 * k:
            raise SweepError(f"{path}: channel encoder emits {width} reals, expected {2 * k}")
        rows += learned_rows(f"ut-k{k}", model, vocab, spec)
    return _finish(rows, spec, "symbols_per_word")


def channel_width(model: SemanticCodec) -> int:
    outs = [v.shape[-1] for k, v in model.state_dict().items() if k.startswith("chan_enc.") and k.endswith(".w")]
    return int(outs[-1])


@dataclass
class CyclesProbe:
    csv: Path
    histogram: Path
    by_length: Path
    hist_counts: dict[float, Counter] = field(default_factory=dict)


def run_cycles_probe(spec: SweepSpec) -> CyclesProbe:
    """Mean and distribution of ACT cycles per SNR, plus a per-length breakdown.

    Writes ``<out>`` (sweep schema), ``<stem>.hist.csv`` with per-position
    cycle counts and ``<stem>.bylen.csv`` with per-sentence means grouped by
    sentence length.
    """
    learned = {k: v for k, v in spec.systems.items() if v not in CLASSIC_SYSTEMS}
    if not learned:
        raise SweepError("cycles probe needs a learned checkpoint")
    rows, details = [], {}
    for label, path in sorted(learned.items()):
        model, vocab = _load_system(label, path)
        if not model.config.act:
            raise SweepError(f"{label}: model was trained with ACT disabled; nothing to probe")
        rows += learned_rows(label, model, vocab, spec, details)
    main = _finish(rows, spec, "cycles_vs_snr")
    stem = main.with_suffix("")
    hist_path, len_path = Path(f"{stem}.hist.csv"), Path(f"{stem}.bylen.csv")
    counts: dict[float, Counter] = {}
    with open(hist_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "snr_db", "cycles", "positions"])
        for label in sorted(details):
            for p in sorted(details[label], key=lambda q: q.snr_db):
                c = Counter(int(v) for v in p.position_cycles)
                counts[p.snr_db] = c
                for n in sorted(c):
                    w.writerow([label, f"{p.snr_db:g}", n, c[n]])
    with open(len_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "snr_db", "length", "mean_cycles", "n_sentences"])
        for label in sorted(details):
            for p in sorted(details[label], key=lambda q: q.snr_db):
                for length in np.unique(p.lengths):
                    sel = p.sentence_cycles[p.lengths == length]
                    w.writerow([label, f"{p.snr_db:g}", int(length), f"{sel.mean():.6f}", sel.size])
    return CyclesProbe(main, hist_path, len_path, counts)


def run_depth_compare(spec: SweepSpec) -> Path:
    """Joint sweep of the ACT model and fixed-depth baselines plus ``<stem>.params.csv``.

    The sweep header is fixed, so trainable-parameter counts go to the
    companion file (system, act, layers, tied, trainable_params).
    """
    if len(spec.systems) < 2:
        raise SweepError("depth comparison needs at least two checkpoints")
    rows, params = [], []
    for label, path in sorted(spec.systems.items()):
        model, vocab = _load_system(label, path)
        cfg = model.config
        params.append([label, int(cfg.act), cfg.layers, int(not cfg.untied), model.param_count()])
        rows += learned_rows(label, model, vocab, spec)
    path = _finish(rows, spec, "depth_compare")
    with open(path.with_suffix("").as_posix() + ".params.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "act", "layers", "tied", "trainable_params"])
        w.writerows(params)
    return path
