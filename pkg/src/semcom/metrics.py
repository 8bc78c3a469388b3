"""Corpus BLEU and word-position error ratio."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass


@dataclass
class EvalRecord:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    ser: float
    mean_cycles: float
    n_sentences: int

    def __post_init__(self):
        for name in ("bleu1", "bleu2", "bleu3", "bleu4", "ser"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.n_sentences < 1:
            raise ValueError("an evaluation record needs at least one sentence")


def _ngrams(words, n: int) -> Counter:
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def bleu(candidates, references, max_n: int = 4, smooth: bool = False) -> float:
    """Corpus-level BLEU with uniform weights over orders 1..max_n.

    Modified precisions are clipped by reference counts and pooled over the
    corpus; brevity penalty ``exp(1 - r/c)`` applies when the candidate
    corpus is shorter. Without smoothing a zero precision at any order gives 0.
    """
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in [1, 4], got {max_n}")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise ValueError("bleu of an empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    c_len = r_len = 0
    for cand, ref in zip(candidates, references):
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, max_n + 1):
            cn = _ngrams(cand, n)
            rn = _ngrams(ref, n)
            matched[n - 1] += sum(min(c, rn[g]) for g, c in cn.items())
            total[n - 1] += max(len(cand) - n + 1, 0)
    if c_len == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matched, total):
        if smooth:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t) / max_n
    bp = 1.0 if c_len >= r_len else math.exp(1.0 - r_len / c_len)
    return min(1.0, bp * math.exp(log_p))


def sentence_errors(cand, ref) -> tuple[int, int]:
    """(mismatched positions, max length) for one aligned pair."""
    n = max(len(cand), len(ref))
    errors = sum(1 for i in range(n) if i >= len(cand) or i >= len(ref) or cand[i] != ref[i])
    return errors, n


def symbol_error_ratio(candidates, references) -> float:
    """Word-position error ratio pooled over the corpus."""
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise ValueError("symbol error ratio of an empty corpus")
    errors = positions = 0
    for cand, ref in zip(candidates, references):
        e, n = sentence_errors(cand, ref)
        errors += e
        positions += n
    return errors / positions if positions else 0.0


def word_accuracy(candidates, references) -> float:
    """Fraction of reference word positions recovered exactly."""
    hit = total = 0
    for cand, ref in zip(candidates, references):
        total += len(ref)
        hit += sum(1 for i, w in enumerate(ref) if i < len(cand) and cand[i] == w)
    return hit / total if total else 1.0


def evaluate_text(candidates, references, mean_cycles: float = 0.0) -> EvalRecord:
    return EvalRecord(
        bleu1=bleu(candidates, references, 1),
        bleu2=bleu(candidates, references, 2),
        bleu3=bleu(candidates, references, 3),
        bleu4=bleu(candidates, references, 4),
        ser=symbol_error_ratio(candidates, references),
        mean_cycles=float(mean_cycles),
        n_sentences=len(references),
    )
