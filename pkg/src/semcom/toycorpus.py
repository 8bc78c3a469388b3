"""Synthetic parliament-style English sentences for desk-scale runs.

The real proceedings corpus is not shipped; this generator produces a
deterministic stand-in with a controllable vocabulary and 4-30 word sentences.
"""
from __future__ import annotations

import numpy as np

NOUNS = """
agreement amendment agency aid approach area assembly balance budget business
campaign capital case century chamber change charter child citizen city claim
climate coast code colleague commission committee community company competition
concern conference conflict consumer contract control cooperation council country
court crisis culture customs debate debt decision declaration defence democracy
development dialogue directive discussion dispute document economy education
election employment energy enterprise environment equality europe evidence
exchange experience expert export farmer field finance fishery food force forest
framework freedom fund future government group growth health history house
house identity impact income industry initiative institution interest investment
island issue job justice labour land language law leader legislation level
market measure meeting member minister mission model money motion nation
network objective office opinion order organisation parliament partner party
peace pension people period person plan policy port position poverty power
president presidency price principle priority problem procedure process product
programme progress project proposal protection quality question rapporteur
region regulation report republic research resolution resource right risk road
rule safety sector security service situation society solution source speaker
standard state strategy structure subject success summit support system tax
technology territory text threat trade training transport treaty union value
vessel victim view village vote water week woman worker world year youth
""".split()

ADJECTIVES = """
able active additional agricultural annual basic better broad central civil
clear common competent complete constructive current democratic difficult
direct domestic early economic effective equal essential european excellent
external fair final financial firm foreign free full general global good great
green high historic huge human important independent industrial internal
international key large legal local long main major medical modern national
necessary new nuclear open overall particular political poor possible practical
present previous private proper public real recent regional relevant rural safe
serious short significant simple single small social special specific stable
strong sufficient sustainable technical total urgent useful various vital weak
whole wide young
""".split()

VERBS = """
accept achieve adopt agree allow analyse apply approve ask assess avoid build
call change choose close complete consider continue create debate defend
define deliver develop discuss encourage ensure establish examine expect
explain extend face finance follow form fund give guarantee help implement
improve include increase introduce invest keep launch lead maintain manage
meet monitor need offer open oppose organise pay plan prepare present prevent
promote propose protect provide publish raise receive recognise reduce reform
reject remove renew replace report request require respect review revise
secure share simplify strengthen study submit support take tackle transfer
understand urge use welcome withdraw
""".split()

ADVERBS = """
again already also carefully clearly closely completely currently directly
effectively finally fully immediately indeed jointly now often quickly really
seriously simply soon still strongly together today urgently
""".split()

PREPOSITIONS = "about across after against among around at before between by during for from in into of on over through to towards under with within without".split()
DETERMINERS = "the a this that every our their its each any some".split()
SUBJECTS = "we they i you he she it".split()
MODALS = "must should will can could would may might shall".split()
CONJUNCTIONS = "and but because while although so since if when whereas".split()


def _pick(rng, bank, limit=None):
    items = bank if limit is None else bank[:limit]
    return items[int(rng.integers(len(items)))]


def _noun_phrase(rng, sizes) -> list[str]:
    words = [_pick(rng, DETERMINERS)]
    if rng.random() < 0.5:
        words.append(_pick(rng, ADJECTIVES, sizes["adj"]))
    words.append(_pick(rng, NOUNS, sizes["noun"]))
    if rng.random() < 0.3:
        words += [_pick(rng, PREPOSITIONS), _pick(rng, DETERMINERS), _pick(rng, NOUNS, sizes["noun"])]
    return words


def _clause(rng, sizes) -> list[str]:
    subject = [_pick(rng, SUBJECTS)] if rng.random() < 0.4 else _noun_phrase(rng, sizes)
    verb = [_pick(rng, MODALS), _pick(rng, VERBS, sizes["verb"])]
    words = subject + verb + _noun_phrase(rng, sizes)
    if rng.random() < 0.3:
        words.append(_pick(rng, ADVERBS))
    return words


def generate_sentences(n: int, seed: int = 0, vocab_scale: float = 1.0,
                       min_len: int = 4, max_len: int = 30) -> list[str]:
    """``n`` sentences of ``min_len..max_len`` words.

    ``vocab_scale`` < 1 restricts the open word classes to their leading
    fraction, shrinking the vocabulary for toy runs.
    """
    rng = np.random.default_rng(seed)
    sizes = {
        "noun": max(4, int(len(NOUNS) * vocab_scale)),
        "adj": max(4, int(len(ADJECTIVES) * vocab_scale)),
        "verb": max(4, int(len(VERBS) * vocab_scale)),
    }
    out = []
    while len(out) < n:
        words = _clause(rng, sizes)
        while rng.random() < 0.45 and len(words) < max_len:
            words += [_pick(rng, CONJUNCTIONS)] + _clause(rng, sizes)
        if min_len <= len(words) <= max_len:
            out.append(" ".join(words))
    return out


def write_corpus(path, n: int, seed: int = 0, vocab_scale: float = 1.0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in generate_sentences(n, seed, vocab_scale):
            fh.write(line + "\n")
