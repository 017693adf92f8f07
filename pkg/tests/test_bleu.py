from __future__ import annotations

import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtcurate.bleu import (
    BleuConfig,
    Smoothing,
    Tokenizer,
    brevity_penalty,
    corpus_bleu,
    ngram_counts,
    sentence_bleu,
    tokenize,
)


NO_SMOOTHING = Smoothing.NONE


# --------------------------------------------------------------------------- #
# Hand-computed fixtures
# --------------------------------------------------------------------------- #
def test_unigram_clipping():
    cfg = BleuConfig(max_n=1, smoothing=NO_SMOOTHING)
    result = sentence_bleu("the the the the", "the cat", cfg)
    assert result.matches == (1,)
    assert result.totals == (4,)
    assert result.score == pytest.approx(25.0, abs=1e-6)


def test_identity_is_100():
    text = "the cat sat on the mat ."
    assert sentence_bleu(text, text).score == pytest.approx(100.0, abs=1e-6)
    assert corpus_bleu([text, "a b"], [text, "a b"]).score == pytest.approx(100.0, abs=1e-6)


def test_identity_is_100_for_segments_shorter_than_max_n():
    short = ["hello", "good morning"]
    assert corpus_bleu(short, short).score == pytest.approx(100.0)
    unsmoothed = BleuConfig(smoothing=NO_SMOOTHING)
    assert sentence_bleu("the cat", "the cat", unsmoothed).score == pytest.approx(100.0)
    result = sentence_bleu("the cat", "the cat", unsmoothed)
    assert result.totals == (2, 1, 0, 0)
    assert result.precisions == (1.0, 1.0, 0.0, 0.0)


def test_effective_order_still_penalizes_lower_orders():
    cfg = BleuConfig(max_n=4, smoothing=NO_SMOOTHING)
    # p1 = 1/2, p2 = 0/1; bigram mismatch zeroes the score
    assert sentence_bleu("a b", "a c", cfg).score == 0.0
    # only unigrams exist
    assert sentence_bleu("a", "a", cfg).score == pytest.approx(100.0)
    # p1 = 1/2 is the whole mean
    assert sentence_bleu("a z", "a y", BleuConfig(max_n=1)).score == pytest.approx(50.0)


@settings(max_examples=100, deadline=None)
@given(
    pairs=st.lists(
        st.tuples(st.lists(st.sampled_from("abcd"), min_size=1, max_size=6),
                  st.lists(st.sampled_from("abcd"), min_size=1, max_size=6)),
        min_size=1,
        max_size=6,
    ),
    data=st.data(),
)
def test_corpus_bleu_ignores_segment_order(pairs, data):
    hyps = [" ".join(h) for h, _ in pairs]
    refs = [" ".join(r) for _, r in pairs]
    order = data.draw(st.permutations(range(len(pairs))))
    shuffled = corpus_bleu([hyps[i] for i in order], [refs[i] for i in order])
    assert shuffled.score == pytest.approx(corpus_bleu(hyps, refs).score, abs=1e-9)


def test_brevity_penalty_is_monotone_in_hypothesis_length():
    ref_len = 20
    penalties = [brevity_penalty(h, ref_len) for h in range(0, 25)]
    assert all(a <= b for a, b in zip(penalties, penalties[1:]))
    assert penalties[-1] == 1.0
    assert 0.0 < penalties[0] <= 1.0


def test_disjoint_is_0():
    assert sentence_bleu("a b c d", "e f g h").score == 0.0
    assert corpus_bleu(["a b c d"], ["e f g h"]).score == 0.0


def test_brevity_penalty_applies_to_short_hypothesis():
    cfg = BleuConfig(max_n=1, smoothing=NO_SMOOTHING)
    result = sentence_bleu("the cat", "the cat sat on the mat", cfg)
    assert result.brevity_penalty == pytest.approx(math.exp(-2.0), abs=1e-12)
    assert result.score == pytest.approx(100.0 * math.exp(-2.0), abs=1e-6)


def test_bigram_precision():
    cfg = BleuConfig(max_n=2, smoothing=NO_SMOOTHING)
    result = sentence_bleu("a b c d", "a b d c", cfg)
    assert result.precisions == pytest.approx((1.0, 1 / 3))
    assert result.score == pytest.approx(100.0 * math.sqrt(1 / 3), abs=1e-6)


def test_sentence_level_default_is_add_one_on_higher_orders():
    cfg = BleuConfig(max_n=2)
    result = sentence_bleu("a b c", "a b d", cfg)
    # p1 = 2/3 unsmoothed, p2 = (1 + 1) / (2 + 1)
    assert result.precisions == pytest.approx((2 / 3, 2 / 3))
    assert result.score == pytest.approx(200 / 3, abs=1e-6)


def test_corpus_level_aggregates_counts():
    cfg = BleuConfig(max_n=1)
    result = corpus_bleu(["a b", "c d"], ["a b", "c e"], cfg)
    assert result.matches == (3,)
    assert result.totals == (4,)
    assert result.score == pytest.approx(75.0, abs=1e-6)


def test_empty_hypothesis_scores_zero_with_bounded_penalty():
    result = sentence_bleu("", "a b")
    assert result.score == 0.0
    assert result.hyp_len == 0
    assert 0.0 < result.brevity_penalty <= 1.0
    assert result.brevity_penalty == pytest.approx(math.exp(-1.0))


def test_case_insensitive_and_intl_tokenizer():
    assert tokenize("Hello, world!") == ["Hello", ",", "world", "!"]
    ws = BleuConfig(tokenizer=Tokenizer.WHITESPACE)
    assert tokenize("Hello, world!", ws) == ["Hello,", "world!"]
    lc = BleuConfig(case_sensitive=False)
    assert sentence_bleu("HELLO world", "hello WORLD", lc).score == pytest.approx(100.0)
    assert sentence_bleu("HELLO world", "hello WORLD").score < 100.0


def test_vietnamese_diacritics_survive_tokenization():
    assert tokenize("Tôi yêu Việt Nam.") == ["Tôi", "yêu", "Việt", "Nam", "."]


def test_corpus_bleu_rejects_bad_input():
    with pytest.raises(ValueError):
        corpus_bleu(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        corpus_bleu([], [])


def test_config_validation():
    with pytest.raises(ValueError):
        BleuConfig(max_n=0)
    with pytest.raises(ValueError):
        BleuConfig(smoothing="bogus")
    assert BleuConfig(smoothing="add_k").smoothing is Smoothing.ADD_K


def test_breakdown_to_dict():
    data = sentence_bleu("a b", "a b").to_dict()
    assert set(data) == {
        "score",
        "precisions",
        "brevity_penalty",
        "hyp_len",
        "ref_len",
        "matches",
        "totals",
    }
    assert isinstance(data["precisions"], list)


# --------------------------------------------------------------------------- #
# Property test against a direct n-gram counting oracle
# --------------------------------------------------------------------------- #
def oracle_bleu(hyp, ref, max_n):
    precisions = []
    for n in range(1, max_n + 1):
        h = Counter(tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1))
        r = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
        total = max(len(hyp) - n + 1, 0)
        matched = sum(min(c, r[g]) for g, c in h.items())
        if total:
            precisions.append(matched / total)
    if not hyp or min(precisions) == 0.0:
        return 0.0
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1 - len(ref) / len(hyp))
    return 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / len(precisions))


tokens = st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=0, max_size=8)


@settings(max_examples=500, deadline=None)
@given(hyp=tokens, ref=tokens, max_n=st.sampled_from([1, 2]))
def test_matches_oracle(hyp, ref, max_n):
    cfg = BleuConfig(max_n=max_n, smoothing=NO_SMOOTHING, tokenizer=Tokenizer.WHITESPACE)
    got = sentence_bleu(" ".join(hyp), " ".join(ref), cfg).score
    assert got == pytest.approx(oracle_bleu(hyp, ref, max_n), abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(hyp=tokens, ref=tokens)
def test_score_in_range(hyp, ref):
    score = sentence_bleu(" ".join(hyp), " ".join(ref)).score
    assert 0.0 <= score <= 100.0


def test_ngram_counts_orders():
    counts = ngram_counts(["a", "b", "a"], 2)
    assert counts[0] == Counter({("a",): 2, ("b",): 1})
    assert counts[1] == Counter({("a", "b"): 1, ("b", "a"): 1})
    assert brevity_penalty(3, 3) == 1.0
