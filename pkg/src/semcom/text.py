"""Corpus loading, vocabulary, tokenisation and length-bucketed batching."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PAD, START, END, UNK = 0, 1, 2, 3
RESERVED = ("<PAD>", "<START>", "<END>", "<UNK>")

_PUNCT = re.compile(r"[.,;:!?'\"]")


def tokenize(line: str) -> list[str]:
    """Lowercase, drop the punctuation set ``. , ; : ! ? ' "``, split on whitespace."""
    return _PUNCT.sub(" ", line.lower()).split()


@dataclass
class CorpusStats:
    kept: int
    dropped: int


def filter_sentences(lines, min_len: int = 4, max_len: int = 30) -> tuple[list[list[str]], CorpusStats]:
    kept, dropped = [], 0
    for line in lines:
        words = tokenize(line)
        if not words and not line.strip():
            continue
        if min_len <= len(words) <= max_len:
            kept.append(words)
        else:
            dropped += 1
    return kept, CorpusStats(len(kept), dropped)


def load_corpus(path, min_len: int = 4, max_len: int = 30) -> tuple[list[list[str]], CorpusStats]:
    """Read one sentence per line; keep those with ``min_len..max_len`` words.

    Blank lines are skipped without counting as dropped.
    """
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValueError(f"{path}: not valid UTF-8 ({exc})") from exc
    return filter_sentences(text.splitlines(), min_len, max_len)


class Vocabulary:
    def __init__(self, tokens: list[str]):
        if list(tokens[:4]) != list(RESERVED):
            raise ValueError(f"vocabulary must start with the reserved tokens {RESERVED}")
        self.id_to_token = list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.id_to_token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())


def build_vocabulary(corpus: list[list[str]], max_size: int = 4000) -> Vocabulary:
    """Keep the ``max_size - 4`` most frequent words; ties go to the lexicographically smaller."""
    if max_size < 5:
        raise ValueError(f"max_size must be at least 5, got {max_size}")
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter(w for sent in corpus for w in sent if w not in RESERVED)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(list(RESERVED) + [w for w, _ in ranked[: max_size - 4]])


@dataclass
class TokenizedSentence:
    ids: list[int]

    @property
    def length(self) -> int:
        return len(self.ids)


def encode_sentence(vocab: Vocabulary, words: list[str]) -> TokenizedSentence:
    return TokenizedSentence([vocab.id(w) for w in words])


def decode_tokens(vocab: Vocabulary, ids) -> list[str]:
    """Map ids back to words, stopping at the first ``<END>``; padding and ``<START>`` are skipped."""
    words = []
    for i in ids:
        i = int(i)
        if i == END:
            break
        if i in (PAD, START):
            continue
        words.append(vocab.token(i))
    return words


@dataclass
class Batch:
    ids: np.ndarray        # [B, L_max] content ids, PAD-filled
    lengths: np.ndarray    # [B]
    index: np.ndarray      # positions of these sentences in the source list

    @property
    def mask(self) -> np.ndarray:
        return (np.arange(self.ids.shape[1])[None, :] < self.lengths[:, None]).astype(np.float32)

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    def decoder_io(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Teacher-forcing input ``<START> w1..wL`` and target ``w1..wL <END>`` plus target mask."""
        b, n = self.ids.shape
        dec_in = np.full((b, n + 1), PAD, dtype=np.int64)
        dec_out = np.full((b, n + 1), PAD, dtype=np.int64)
        dec_in[:, 0] = START
        for r, length in enumerate(self.lengths):
            dec_in[r, 1:length + 1] = self.ids[r, :length]
            dec_out[r, :length] = self.ids[r, :length]
            dec_out[r, length] = END
        tmask = (np.arange(n + 1)[None, :] <= self.lengths[:, None]).astype(np.float32)
        return dec_in, dec_out, tmask


def pad_batch(sentences: list[TokenizedSentence], index=None) -> Batch:
    lengths = np.array([s.length for s in sentences], dtype=np.int64)
    ids = np.full((len(sentences), int(lengths.max())), PAD, dtype=np.int64)
    for r, s in enumerate(sentences):
        ids[r, : s.length] = s.ids
    idx = np.arange(len(sentences)) if index is None else np.asarray(index)
    return Batch(ids, lengths, idx)


def make_batches(sentences: list[TokenizedSentence], batch_size: int, seed: int,
                 bucketed: bool = True) -> list[Batch]:
    """Split into batches, each sentence exactly once.

    Bucketed mode sorts by length (random tie order), cuts consecutive chunks
    and shuffles the chunk order, which keeps padding low. Deterministic in
    ``seed``.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not sentences:
        return []
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sentences))
    if bucketed:
        lengths = np.array([sentences[i].length for i in order])
        order = order[np.argsort(lengths, kind="stable")]
    chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if bucketed:
        chunks = [chunks[i] for i in rng.permutation(len(chunks))]
    return [pad_batch([sentences[i] for i in c], c) for c in chunks]


def padding_fraction(batches: list[Batch]) -> float:
    total = sum(b.ids.size for b in batches)
    real = sum(int(b.lengths.sum()) for b in batches)
    return 1.0 - real / total if total else 0.0
