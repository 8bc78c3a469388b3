import numpy as np
import pytest

from semcom.text import (
    END, PAD, START, UNK, Vocabulary, build_vocabulary, decode_tokens, encode_sentence, filter_sentences,
    load_corpus, make_batches, pad_batch, padding_fraction, tokenize,
)
from semcom.toycorpus import generate_sentences


def test_tokenize_lowercases_and_strips_punctuation():
    assert tokenize('Hello, World! "It\'s" done; ok: yes?') == ["hello", "world", "it", "s", "done", "ok", "yes"]


def test_load_corpus_filters_by_length(tmp_path):
    words = [f"w{i}" for i in range(31)]
    path = tmp_path / "c.txt"
    path.write_text("Hello, world.\n" + " ".join(words) + "\n" + " ".join(words[:30]) + "\nOne two three four.\n\n",
                    encoding="utf-8")
    sents, stats = load_corpus(path)
    assert [len(s) for s in sents] == [30, 4]
    assert stats.kept == 2 and stats.dropped == 2
    assert all(4 <= len(s) <= 30 for s in sents)


def test_load_corpus_empty_and_bad_encoding(tmp_path):
    empty = tmp_path / "e.txt"
    empty.write_text("", encoding="utf-8")
    sents, stats = load_corpus(empty)
    assert sents == [] and stats.kept == 0
    bad = tmp_path / "b.txt"
    bad.write_bytes(b"caf\xe9 au lait ok\n")
    with pytest.raises(ValueError, match="UTF-8"):
        load_corpus(bad)
    with pytest.raises(OSError):
        load_corpus(tmp_path / "missing.txt")


def test_vocabulary_all_fit_and_reserved_ids():
    v = build_vocabulary([["a", "b", "c", "d"]], max_size=8)
    assert v.id_to_token == ["<PAD>", "<START>", "<END>", "<UNK>", "a", "b", "c", "d"]
    assert (v.id("<PAD>"), v.id("<START>"), v.id("<END>"), v.id("<UNK>")) == (PAD, START, END, UNK)


def test_vocabulary_ties_lexicographic_and_top_k():
    v = build_vocabulary([["d", "c", "b", "a"]], max_size=6)
    assert v.id_to_token[4:] == ["a", "b"]
    corpus = [["z"] * 3 + list("abcdefghi")]
    v = build_vocabulary(corpus, max_size=5)
    assert v.id_to_token[4:] == ["z"]
    assert v.id("a") == UNK
    with pytest.raises(ValueError):
        build_vocabulary(corpus, max_size=4)


def test_vocabulary_dense_stable_and_file_round_trip(tmp_path):
    corpus, _ = filter_sentences(generate_sentences(200, seed=3))
    v1, v2 = build_vocabulary(corpus, 300), build_vocabulary(corpus, 300)
    assert v1 == v2
    assert sorted(v1.token_to_id.values()) == list(range(len(v1)))
    v1.save(tmp_path / "vocab.txt")
    lines = (tmp_path / "vocab.txt").read_text(encoding="utf-8").splitlines()
    assert lines[:4] == ["<PAD>", "<START>", "<END>", "<UNK>"]
    assert Vocabulary.load(tmp_path / "vocab.txt") == v1


def test_encode_decode_round_trip_and_unknown():
    v = build_vocabulary([["the", "cat", "sat", "down"]], 10)
    words = ["the", "cat", "sat", "down"]
    assert decode_tokens(v, encode_sentence(v, words).ids) == words
    ts = encode_sentence(v, ["the", "dog"])
    assert ts.ids[1] == UNK
    assert decode_tokens(v, ts.ids) == ["the", "<UNK>"]
    ids = [START] + encode_sentence(v, words).ids[:2] + [END] + [v.id("sat"), PAD, PAD]
    assert decode_tokens(v, ids) == ["the", "cat"]


def _sentences(lengths, seed=0):
    from semcom.text import TokenizedSentence

    rng = np.random.default_rng(seed)
    return [TokenizedSentence(list(rng.integers(4, 50, size=n))) for n in lengths]


def test_make_batches_cardinality_and_coverage():
    sents = _sentences([5] * 10)
    assert len(make_batches(sents, 10, seed=0)) == 1
    sents = _sentences(np.random.default_rng(1).integers(4, 31, size=103))
    batches = make_batches(sents, 16, seed=4)
    seen = np.concatenate([b.index for b in batches])
    assert sorted(seen.tolist()) == list(range(103))
    with pytest.raises(ValueError):
        make_batches(sents, 0, seed=0)


def test_make_batches_deterministic():
    sents = _sentences(np.random.default_rng(2).integers(4, 31, size=50))
    a = make_batches(sents, 8, seed=7)
    b = make_batches(sents, 8, seed=7)
    assert [x.index.tolist() for x in a] == [x.index.tolist() for x in b]
    assert all(np.array_equal(x.ids, y.ids) for x, y in zip(a, b))


def test_bucketing_reduces_padding():
    lengths = [4] * 64 + [30] * 64
    sents = _sentences(np.random.default_rng(3).permutation(lengths))
    bucketed = padding_fraction(make_batches(sents, 16, seed=0, bucketed=True))
    naive = padding_fraction(make_batches(sents, 16, seed=0, bucketed=False))
    assert bucketed < naive
    assert bucketed == pytest.approx(0.0)


def test_batch_mask_and_decoder_io():
    sents = _sentences([4, 6])
    batch = pad_batch(sents)
    assert batch.ids.shape == (2, 6)
    assert np.all(batch.ids[batch.mask > 0] != PAD)
    assert np.all(batch.ids[batch.mask == 0] == PAD)
    dec_in, dec_out, tmask = batch.decoder_io()
    assert dec_in[0, 0] == START and dec_out[0, 4] == END and tmask[0].sum() == 5
    assert np.array_equal(dec_in[1, 1:7], batch.ids[1]) and np.array_equal(dec_out[1, :6], batch.ids[1])
