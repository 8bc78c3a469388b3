"""Command line entry point: data preparation, training, evaluation and sweeps."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    CLASSIC_SYSTEMS, DEFAULT_GRID, SweepSpec, run_baseline, run_cycles_probe, run_depth_compare,
    run_snr_sweep, run_symbols_sweep,
)
from .plotting import PLOT_KINDS, emit_plot

log = logging.getLogger("semcom")


# ------------------------------------------------------------------ argument helpers

def parse_snr_list(text: str) -> list[float]:
    """``0,2,4``, ``0:12:2`` (inclusive) or ``0,2,...,12`` (arithmetic progression)."""
    text = text.strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"bad SNR range {text!r}; use start:stop:step")
        lo, hi, step = parts
        return [round(v, 10) for v in np.arange(lo, hi + step / 2, step)]
    items = [s.strip() for s in text.split(",") if s.strip()]
    if "..." in items:
        i = items.index("...")
        if i < 2 or i != len(items) - 2:
            raise ValueError(f"bad SNR progression {text!r}; use a,b,...,z")
        head = [float(v) for v in items[:i]]
        step, stop = head[-1] - head[-2], float(items[-1])
        if step <= 0:
            raise ValueError(f"SNR progression {text!r} must increase")
        return head[:-1] + [round(v, 10) for v in np.arange(head[-1], stop + step / 2, step)]
    if not items:
        raise ValueError("empty SNR list")
    return [float(v) for v in items]


def parse_labeled(values: list[str]) -> dict[str, str]:
    """``label=path`` pairs; a bare path is labelled by its file stem."""
    out: dict[str, str] = {}
    for v in values or []:
        label, sep, path = v.partition("=")
        if not sep:
            label, path = Path(v).stem, v
        if label in out:
            raise ValueError(f"duplicate system label {label!r}")
        out[label] = path
    return out


def read_sentences(path, limit: int | None = None) -> list[list[str]]:
    """Evaluation sentences: a text file, or ``valid.txt`` inside a prepared data directory."""
    from .text import tokenize

    p = Path(path)
    if p.is_dir():
        p = p / "valid.txt"
    if not p.exists():
        raise FileNotFoundError(f"no sentence file at {p}")
    sents = [w for w in (tokenize(line) for line in p.read_text(encoding="utf-8").splitlines()) if w]
    if limit:
        sents = sents[:limit]
    if not sents:
        raise ValueError(f"{p} holds no sentences")
    return sents


def _grid(args) -> list[float]:
    return parse_snr_list(args.snr_list) if args.snr_list else DEFAULT_GRID[args.channel]


def _spec(args, kind: str, systems: dict[str, str]) -> SweepSpec:
    return SweepSpec(kind=kind, snr_grid=_grid(args), systems=systems,
                     dataset=read_sentences(args.data, args.limit), channel=args.channel,
                     seed=args.seed, out=args.out, workers=args.workers, plot=not args.no_plot)


# ------------------------------------------------------------------ subcommands

def cmd_toy_corpus(args) -> None:
    from .toycorpus import write_corpus

    write_corpus(args.out, args.n, seed=args.seed, vocab_scale=args.vocab_scale)
    print(f"wrote {args.n} sentences to {args.out}")


def cmd_prepare_data(args) -> None:
    from .text import build_vocabulary, load_corpus

    src = Path(args.corpus)
    files = sorted(src.glob("*.txt")) if src.is_dir() else [src]
    if not files:
        raise FileNotFoundError(f"no .txt files under {src}")
    sents, dropped = [], 0
    for f in files:
        s, stats = load_corpus(f, args.min_len, args.max_len)
        sents += s
        dropped += stats.dropped
    if not sents:
        raise ValueError("no sentences survived length filtering")
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(sents))
    n_valid = max(1, int(round(len(sents) * args.valid_frac)))
    valid = [sents[i] for i in sorted(order[:n_valid])]
    train = [sents[i] for i in sorted(order[n_valid:])]
    vocab = build_vocabulary(train, args.vocab_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train.txt").write_text("".join(" ".join(s) + "\n" for s in train), encoding="utf-8")
    (out / "valid.txt").write_text("".join(" ".join(s) + "\n" for s in valid), encoding="utf-8")
    vocab.save(out / "vocab.txt")
    print(f"kept {len(sents)} sentences (dropped {dropped}); train {len(train)}, valid {len(valid)}; "
          f"vocabulary {len(vocab)}")


def cmd_train(args) -> None:
    from .model import SemanticCodec, UTConfig
    from .text import Vocabulary, encode_sentence
    from .train import TrainConfig, load_run_config, train

    data = Path(args.corpus)
    vocab = Vocabulary.load(data / "vocab.txt")
    model_cfg, train_cfg = (None, TrainConfig())
    if args.config:
        model_cfg, train_cfg, _ = load_run_config(args.config)
    model_cfg = (model_cfg or UTConfig(vocab_size=len(vocab))).replace(vocab_size=len(vocab))
    overrides = {"checkpoint": args.out}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.channel:
        overrides["channel"] = args.channel
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    train_cfg = TrainConfig(**{**train_cfg.__dict__, **overrides})
    sents = read_sentences(data / "train.txt")
    valid_path = data / "valid.txt"
    valid = [encode_sentence(vocab, s) for s in read_sentences(valid_path)] if valid_path.exists() else None
    model = SemanticCodec(model_cfg, seed=train_cfg.seed)
    hist = train(model, [encode_sentence(vocab, s) for s in sents], train_cfg, vocab=vocab, valid=valid)
    print(f"trained {len(hist.steps)} steps in {hist.seconds:.1f}s; final epoch loss "
          f"{hist.epoch_loss[-1] if hist.epoch_loss else float('nan'):.4f}; checkpoint {args.out}")


def cmd_eval(args) -> None:
    systems = parse_labeled(args.checkpoint)
    if len(systems) != 1:
        raise ValueError("eval takes exactly one --checkpoint")
    print(run_snr_sweep(_spec(args, "bleu_vs_snr", systems)))


def cmd_sweep_snr(args) -> None:
    systems = parse_labeled(args.checkpoint)
    for codec in args.baseline or []:
        systems[codec] = codec
    print(run_snr_sweep(_spec(args, args.kind, systems)))


def cmd_sweep_symbols(args) -> None:
    by_k = {}
    for label, path in parse_labeled(args.checkpoint).items():
        try:
            by_k[int(label)] = path
        except ValueError:
            raise ValueError(f"sweep-symbols expects K=path pairs, got label {label!r}") from None
    spec = _spec(args, "symbols_per_word", {f"K={k}": p for k, p in by_k.items()})
    print(run_symbols_sweep(spec, by_k))


def cmd_probe_cycles(args) -> None:
    probe = run_cycles_probe(_spec(args, "cycles_vs_snr", parse_labeled(args.checkpoint)))
    print(f"{probe.csv}\n{probe.histogram}\n{probe.by_length}")


def cmd_depth_compare(args) -> None:
    print(run_depth_compare(_spec(args, "depth_compare", parse_labeled(args.checkpoint))))


def cmd_baseline(args) -> None:
    codecs = args.codec.split(",")
    for c in codecs:
        if c not in CLASSIC_SYSTEMS:
            raise ValueError(f"unknown codec {c!r}; choose from {CLASSIC_SYSTEMS}")
    print(run_baseline(_spec(args, "bleu_vs_snr", {c: c for c in codecs})))


def cmd_plot(args) -> None:
    info = emit_plot(args.csv, args.kind, args.out)
    print(info.path)


# ------------------------------------------------------------------ parser

def _sweep_flags(p: argparse.ArgumentParser, checkpoints: bool = True) -> None:
    p.add_argument("--data", required=True, help="sentence file or prepared data directory (uses valid.txt)")
    p.add_argument("--limit", "--sentences", dest="limit", type=int, default=None,
                   help="evaluate only the first N sentences")
    p.add_argument("--workers", type=int, default=1, help="threads across SNR points")
    p.add_argument("--no-plot", action="store_true", help="skip the SVG next to the CSV")
    if checkpoints:
        p.add_argument("--checkpoint", action="append", default=[], help="[label=]path, repeatable")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--channel", choices=["awgn", "rayleigh"], default=None)
    common.add_argument("--snr-list", default=None, help="e.g. 0,2,4 or 0:12:2 or 0,2,...,12")
    common.add_argument("--out", default=None)
    common.add_argument("--config", default=None, help="flat key=value config file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="semcom", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy-corpus", parents=[common], help="write a synthetic sentence corpus")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--vocab-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_toy_corpus, stage="toy-corpus")

    p = sub.add_parser("prepare-data", parents=[common], help="filter, split and build a vocabulary")
    p.add_argument("--in", "--corpus", dest="corpus", required=True, help="text file or directory of .txt files")
    p.add_argument("--min-len", type=int, default=4)
    p.add_argument("--max-len", type=int, default=30)
    p.add_argument("--vocab-size", type=int, default=4000)
    p.add_argument("--valid-frac", type=float, default=0.1)
    p.set_defaults(func=cmd_prepare_data, stage="prepare-data")

    p = sub.add_parser("train", parents=[common], help="train a codec end to end")
    p.add_argument("--corpus", required=True, help="directory written by prepare-data")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train, stage="train")

    p = sub.add_parser("eval", parents=[common], help="evaluate one checkpoint over an SNR grid")
    _sweep_flags(p)
    p.set_defaults(func=cmd_eval, stage="eval")

    p = sub.add_parser("sweep-snr", parents=[common], help="BLEU/SER versus SNR for several systems")
    _sweep_flags(p)
    p.add_argument("--baseline", action="append", choices=list(CLASSIC_SYSTEMS), default=[])
    p.add_argument("--kind", default="bleu_vs_snr", choices=["bleu_vs_snr", "ser_vs_snr", "train_snr_regimes"])
    p.set_defaults(func=cmd_sweep_snr, stage="sweep-snr")

    p = sub.add_parser("sweep-symbols", parents=[common], help="BLEU versus symbols per word (K=path pairs)")
    _sweep_flags(p)
    p.set_defaults(func=cmd_sweep_symbols, stage="sweep-symbols")

    p = sub.add_parser("probe-cycles", parents=[common], help="ACT cycle statistics versus SNR")
    _sweep_flags(p)
    p.set_defaults(func=cmd_probe_cycles, stage="probe-cycles")

    p = sub.add_parser("depth-compare", parents=[common], help="ACT model versus fixed-depth baselines")
    _sweep_flags(p)
    p.set_defaults(func=cmd_depth_compare, stage="depth-compare")

    p = sub.add_parser("baseline", parents=[common], help="classic Turbo/RS chains over an SNR grid")
    _sweep_flags(p, checkpoints=False)
    p.add_argument("--codec", default="turbo,rs")
    p.set_defaults(func=cmd_baseline, stage="baseline")

    p = sub.add_parser("plot", parents=[common], help="render a sweep CSV to SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", default="bleu_vs_snr", choices=sorted(PLOT_KINDS))
    p.set_defaults(func=cmd_plot, stage="plot")
    return parser


_REQUIRES_OUT = {"toy-corpus", "prepare-data", "train", "eval", "sweep-snr", "sweep-symbols",
                 "probe-cycles", "depth-compare", "baseline"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in _REQUIRES_OUT and not args.out:
        print(f"error [{args.stage}]: --out is required", file=sys.stderr)
        return 2
    if args.command not in ("train",):
        args.seed = 0 if args.seed is None else args.seed
        args.channel = args.channel or "awgn"
    try:
        args.func(args)
    except KeyboardInterrupt:
        print(f"error [{args.stage}]: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # report every failure with its stage
        log.debug("failure", exc_info=True)
        print(f"error [{args.stage}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
