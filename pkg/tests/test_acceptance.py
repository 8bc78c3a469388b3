"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints ``ACCEPTANCE <n> PASS|FAIL: <measurements>`` whether or not
the assertion holds. Criteria 6 to 9 train models and dominate the runtime
(about 30 minutes on one core).
"""
import csv
import time
from functools import lru_cache

import numpy as np
import pytest

from semcom.autodiff import Tensor, gradcheck, ops, precision
from semcom.channel import (
    ChannelConfig, ComplexBlock, draw_fading, power_normalize, snr_to_noise_var, transmit, transmit_awgn,
)
from semcom.classic import qam
from semcom.classic.pipeline import run_classic_pipeline
from semcom.classic.rs import rs_decode, rs_encode
from semcom.classic.turbo import TurboConfig, turbo_decode, turbo_encode
from semcom.experiments import SweepSpec, run_depth_compare, run_snr_sweep
from semcom.model import SemanticCodec, UTConfig
from semcom.text import build_vocabulary, encode_sentence, filter_sentences
from semcom.toycorpus import generate_sentences
from semcom.train import TrainConfig, checkpoint_save, evaluate_points, train

from test_act import CASES, scalar_act, scripted_run
from test_autodiff import PRIMITIVES
from test_model import toy_batch, toy_config

pytestmark = pytest.mark.slow


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


# ------------------------------------------------------------------ 1 gradients

def test_criterion_1_gradient_correctness(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = {}
    for name, op in sorted(PRIMITIVES.items()):
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        w = rng.normal(size=64)

        def loss():
            flat = ops.reshape(op(a, b), (-1,))
            return ops.sum(flat * w[: flat.shape[0]])

        worst[name] = max(gradcheck(loss, {"a": a, "b": b}, h=1e-5).values())
    logits = Tensor(rng.normal(size=(2, 3, 5)), requires_grad=True)
    tgt, mask = np.array([[1, 4, 0], [2, 2, 3]]), np.array([[1, 1, 0], [1, 1, 1]], float)
    worst["cross_entropy"] = gradcheck(lambda: ops.cross_entropy(logits, tgt, mask), {"l": logits}, h=1e-5)["l"]
    table = Tensor(rng.normal(size=(6, 3)), requires_grad=True)
    ids, ew = np.array([[1, 2, 1], [5, 0, 1]]), rng.normal(size=(2, 3, 3))
    worst["embedding"] = gradcheck(lambda: ops.sum(ops.embedding(table, ids) * ew), {"t": table}, h=1e-5)["t"]

    # composed L_total at L=4, d_model=8, vocab=16, K=2
    model = SemanticCodec(toy_config(), seed=7)
    batch = toy_batch((4, 4), seed=8)
    errs = gradcheck(lambda: model.loss(batch, "awgn", 0.05, np.random.default_rng(0)).total, model.params, h=1e-5)
    worst["L_total"] = max(errs.values())
    elapsed = time.perf_counter() - start
    bad = {k: v for k, v in worst.items() if not v < 1e-3}
    ok = not bad and elapsed < 60
    report(capsys, 1, ok, f"{len(worst)} checks, max rel err {max(worst.values()):.2e}, "
                          f"L_total {worst['L_total']:.2e}, {elapsed:.1f}s; failing {bad}")


# ------------------------------------------------------------------ 2 ACT oracle

def test_criterion_2_act_oracle(capsys):
    mismatches, checked = [], 0
    for name, ps in sorted(CASES.items()):
        states = np.random.default_rng(1).normal(size=(5, 1, 1, 3))
        with precision(np.float64):
            res = scripted_run(np.array(ps)[:, None, None], states)
        ws, n, r = scalar_act(ps)
        got = [w[0, 0] for w in res.weights]
        good = (res.cycles[0, 0] == n and np.allclose(got, ws, atol=1e-12)
                and res.ponder.data[0, 0] == res.remainders.data[0, 0] + res.cycles[0, 0]
                and abs(sum(got) - 1) <= 1e-6 and res.cycles[0, 0] <= 5)
        checked += 1
        if not good:
            mismatches.append(name)
    # random scores with padding
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = rng.uniform(size=(5, 4, 7))
        valid = rng.uniform(size=(4, 7)) > 0.2
        with precision(np.float64):
            res = scripted_run(p, rng.normal(size=(5, 4, 7, 2)), valid=valid)
        wsum = np.sum(res.weights, axis=0)
        if not (np.allclose(wsum[valid], 1, atol=1e-6) and res.cycles.max() <= 5
                and np.array_equal(res.ponder.data, (res.remainders.data + res.cycles) * valid)):
            mismatches.append("random")
    report(capsys, 2, not mismatches, f"{checked} scripted sequences + 50 random batches; mismatches {mismatches}")


# ------------------------------------------------------------------ 3 channel

def test_criterion_3_channel_calibration(capsys):
    errors = {}
    for snr in (-5, 0, 5, 10, 15, 20):
        rng = np.random.default_rng(100 + snr)
        z = rng.normal(size=1_000_000) + 1j * rng.normal(size=1_000_000)
        x = power_normalize(ComplexBlock.from_complex(z))
        y, _ = transmit(x, ChannelConfig("awgn", snr), rng)
        noise = y.to_complex() - x.to_complex()
        errors[snr] = abs(10 * np.log10(x.mean_power() / np.mean(np.abs(noise) ** 2)) - snr)
    h = draw_fading(np.random.default_rng(7), 1_000_000)
    eh2 = float(np.mean(np.abs(h) ** 2))
    x = ComplexBlock.from_complex(np.random.default_rng(8).normal(size=(100, 16)) + 0j)
    ident = all(np.allclose(transmit(x, ChannelConfig(k, 0.0), np.random.default_rng(9), noise_var=0.0)[0]
                            .to_complex(), x.to_complex(), atol=1e-12) for k in ("awgn", "rayleigh"))
    ok = max(errors.values()) < 0.1 and abs(eh2 - 1) <= 0.01 and ident
    report(capsys, 3, ok, f"max SNR error {max(errors.values()):.4f} dB, E|h|^2 {eh2:.4f}, identity {ident}")


# ------------------------------------------------------------------ 4 classic codecs

def _uncoded_ber(snr, n_bits, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=n_bits).astype(np.uint8)
    nv = snr_to_noise_var(snr)
    llr = qam.qam64_demodulate(transmit_awgn(qam.qam64_modulate(bits), nv, rng), nv)
    return float(np.mean(qam.hard_bits(llr)[:n_bits] != bits))


def test_criterion_4_classic_codecs(capsys):
    rng = np.random.default_rng(0)
    u = rng.integers(0, 2, size=1000).astype(np.uint8)
    cw = turbo_encode(u)
    turbo_rt = np.array_equal(turbo_decode(np.where(cw == 0, 10.0, -10.0), u.size), u)
    data = bytes(rng.integers(0, 256, size=223, dtype=np.uint8))
    rs_rt = rs_decode(rs_encode(data)) == data

    corrected = 0
    for _ in range(1000):
        data = bytes(rng.integers(0, 256, size=223, dtype=np.uint8))
        c = bytearray(rs_encode(data))
        for pos in rng.choice(255, size=int(rng.integers(1, 17)), replace=False):
            c[pos] ^= int(rng.integers(1, 256))
        try:
            corrected += rs_decode(bytes(c)) == data
        except Exception:
            pass

    # operating point: grid SNR whose uncoded BER is closest to 1e-2
    grid = np.arange(14.0, 22.01, 0.25)
    bers = [_uncoded_ber(s, 600_000, i) for i, s in enumerate(grid)]
    snr = float(grid[int(np.argmin(np.abs(np.log10(np.maximum(bers, 1e-9)) + 2)))])
    uncoded = _uncoded_ber(snr, 600_000, 999)
    nv = snr_to_noise_var(snr)
    errs = nbits = 0
    cfg = TurboConfig()
    for blk in range(17):
        r = np.random.default_rng([1, blk])
        u = r.integers(0, 2, size=6144).astype(np.uint8)
        cw = turbo_encode(u, cfg)
        llr = qam.qam64_demodulate(transmit_awgn(qam.qam64_modulate(cw), nv, r), nv)[: cw.size]
        errs += int(np.count_nonzero(turbo_decode(llr, u.size, cfg) != u))
        nbits += u.size
    coded = errs / nbits

    pts = qam.constellation()
    step = 2 / np.sqrt(42)
    gray = all(bin(a ^ b).count("1") == 1 for a in range(64) for b in range(64)
               if np.isclose(abs(pts[a] - pts[b]), step))
    ok = turbo_rt and rs_rt and corrected == 1000 and coded < uncoded / 10 and nbits >= 100_000 and gray
    report(capsys, 4, ok, f"round trips turbo={turbo_rt} rs={rs_rt}; RS corrected {corrected}/1000; "
                          f"at {snr:g} dB uncoded BER {uncoded:.2e} vs turbo {coded:.2e} over {nbits} bits; "
                          f"gray {gray}")


# ------------------------------------------------------------------ 5 classic at 8 dB

def test_criterion_5_turbo_word_accuracy(capsys):
    start = time.perf_counter()
    sents, _ = filter_sentences(generate_sentences(1000, seed=5))
    ch = ChannelConfig("awgn", 8.0)
    turbo = run_classic_pipeline(sents, "turbo", ch, seed=1)
    rs = run_classic_pipeline(sents, "rs", ch, seed=1)
    elapsed = time.perf_counter() - start
    ok = len(sents) >= 1000 and turbo.word_accuracy >= 0.98 and rs.word_accuracy < turbo.word_accuracy \
        and elapsed <= 600
    report(capsys, 5, ok, f"{len(sents)} sentences at 8 dB: turbo word acc {turbo.word_accuracy:.4f}, "
                          f"RS {rs.word_accuracy:.4f}, {elapsed:.0f}s")


# ------------------------------------------------------------------ 6 end-to-end training

# Table I dimensions with a linear final channel layer; ReLU there dies during
# training. Without warmup the decoder sits on a language-model plateau for a
# seed-dependent number of epochs. The ponder term is at least 2 per ACT stack,
# so the 50% loss drop also needs the cross-entropy well below 0.4.
FULL_EPOCHS = 120


def test_criterion_6_end_to_end_training(capsys):
    start = time.perf_counter()
    lines, _ = filter_sentences(generate_sentences(5000, seed=0))
    vocab = build_vocabulary(lines, 1000)
    data = [encode_sentence(vocab, s) for s in lines]
    train_set, held_out = data[:4500], data[4500:]
    cfg = UTConfig(vocab_size=len(vocab), channel_activation="linear")
    model = SemanticCodec(cfg, seed=0)
    tc = TrainConfig(epochs=FULL_EPOCHS, batch_size=64, lr_main=2e-3, lr_act=2e-3, optimizer="adam",
                     warmup_steps=500, lr_schedule="cosine", train_snr="uniform:0,10", seed=0, log_every=0)
    hist = train(model, train_set, tc)
    first = float(np.mean([s.total for s in hist.steps[:100]]))
    last = hist.epoch_loss[-1]
    point = evaluate_points(model, held_out, [10.0], "awgn", seed=0)[0]
    elapsed = time.perf_counter() - start
    drop = 1 - last / first
    ok = len(lines) == 5000 and len(vocab) <= 1000 and drop >= 0.5 and point.record.bleu1 >= 0.9 \
        and elapsed <= 7200
    report(capsys, 6, ok, f"vocab {len(vocab)}, loss {first:.3f} -> {last:.3f} ({drop:.1%} drop), "
                          f"held-out BLEU-1 at 10 dB {point.record.bleu1:.4f}, {elapsed / 60:.1f} min")


# ------------------------------------------------------------------ toy-scale runs for 7, 8, 9

SEEDS = (0, 1, 2, 3)


@lru_cache(maxsize=None)
def toy_data():
    lines, _ = filter_sentences(generate_sentences(2200, seed=100, vocab_scale=0.1, max_len=12))
    vocab = build_vocabulary(lines)
    data = [encode_sentence(vocab, s) for s in lines]
    return vocab, data[:2000], data[2000:]


@lru_cache(maxsize=None)
def toy_model(seed, regime, k=8):
    vocab, train_set, _ = toy_data()
    cfg = UTConfig(vocab_size=len(vocab), d_model=32, heads=4, ffn_inner=64, channel_hidden=64, k_symbols=k,
                   dropout=0.0, channel_activation="linear", max_len=32)
    model = SemanticCodec(cfg, seed=seed)
    train(model, train_set, TrainConfig(epochs=40, batch_size=32, lr_main=2e-3, lr_act=2e-3, optimizer="adam",
                                        train_snr=regime, seed=seed, log_every=0))
    return model


def toy_eval(model, snrs, seed):
    return evaluate_points(model, toy_data()[2], snrs, "awgn", seed=seed)


def test_criterion_7_training_regimes(capsys):
    wins, lines = 0, []
    for seed in SEEDS:
        uni = {p.snr_db: p.record.bleu1 for p in toy_eval(toy_model(seed, "uniform:0,10"), [0, 12], seed)}
        hi = toy_eval(toy_model(seed, "fixed:10"), [0], seed)[0].record.bleu1
        lo = toy_eval(toy_model(seed, "fixed:0"), [12], seed)[0].record.bleu1
        win = uni[0] > hi and uni[12] > lo
        wins += win
        lines.append(f"seed {seed}: 0dB {uni[0]:.3f} vs fixed10 {hi:.3f}, 12dB {uni[12]:.3f} vs fixed0 {lo:.3f}")
    report(capsys, 7, wins >= 3, f"{wins}/4 seeds; " + "; ".join(lines))


def test_criterion_8_cycles_adaptivity(capsys):
    holds, lines, peak = 0, [], 0
    for seed in SEEDS:
        pts = {p.snr_db: p for p in toy_eval(toy_model(seed, "uniform:0,10"), [0, 10], seed)}
        c0, c10 = pts[0].record.mean_cycles, pts[10].record.mean_cycles
        peak = max(peak, pts[0].position_cycles.max(), pts[10].position_cycles.max())
        holds += c0 >= c10
        lines.append(f"seed {seed}: {c0:.4f} vs {c10:.4f}")
    report(capsys, 8, holds >= 3 and peak <= 5,
           f"{holds}/4 seeds with cycles(0 dB) >= cycles(10 dB), max cycles {peak:g}; " + "; ".join(lines))


def test_criterion_9_symbols_per_word(capsys):
    ok, lines = True, []
    for seed in SEEDS:
        scores = [toy_eval(toy_model(seed, "uniform:0,10", k), [6], seed)[0].record.bleu1 for k in (1, 4, 8)]
        ok &= scores[0] <= scores[1] <= scores[2]
        lines.append(f"seed {seed}: " + "/".join(f"{s:.3f}" for s in scores))
    report(capsys, 9, ok, "BLEU-1 at 6 dB for K=1/4/8; " + "; ".join(lines))


# ------------------------------------------------------------------ 10 parameter accounting

def test_criterion_10_parameter_accounting(capsys, tmp_path):
    lines, _ = filter_sentences(generate_sentences(200, seed=3))
    vocab = build_vocabulary(lines, 1000)
    base = UTConfig(vocab_size=len(vocab))
    systems = {}
    for label, cfg in (("ut", base), ("transformer3x3", base.replace(act=False, layers=3, tied=False)),
                       ("transformer6x6", base.replace(act=False, layers=6, tied=False))):
        path = tmp_path / f"{label}.ckpt"
        checkpoint_save(SemanticCodec(cfg, seed=0), path, vocab)
        systems[label] = str(path)
    spec = SweepSpec("depth_compare", [10.0], systems, lines[:8], out=str(tmp_path / "depth.csv"), plot=False)
    run_depth_compare(spec)
    with open(tmp_path / "depth.params.csv") as fh:
        params = {r["system"]: int(r["trainable_params"]) for r in csv.DictReader(fh)}
    ok = params["ut"] < params["transformer6x6"]
    report(capsys, 10, ok, f"trainable params {params}")


# ------------------------------------------------------------------ 11 determinism

def test_criterion_11_sweep_determinism(capsys, tmp_path):
    lines, _ = filter_sentences(generate_sentences(60, seed=4))
    vocab = build_vocabulary(lines, 500)
    path = tmp_path / "ut.ckpt"
    checkpoint_save(SemanticCodec(toy_config(vocab_size=len(vocab)), seed=2), path, vocab)
    systems = {"ut": str(path), "turbo": "turbo", "rs": "rs"}
    results = {}
    for channel in ("awgn", "rayleigh"):
        blobs = []
        for run, workers in (("a", 1), ("b", 1), ("c", 4)):
            out = tmp_path / f"{channel}-{run}.csv"
            run_snr_sweep(SweepSpec("bleu_vs_snr", [0.0, 4.0, 8.0, 12.0], systems, lines[:30], channel=channel,
                                    seed=11, out=str(out), workers=workers, plot=False))
            blobs.append(out.read_bytes())
        results[channel] = (blobs[0] == blobs[1], blobs[0] == blobs[2])
    ok = all(a and b for a, b in results.values())
    report(capsys, 11, ok, f"(rerun identical, parallel==serial) per channel: {results}")
