from __future__ import annotations

import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtcurate.corpus import Corpus, SentencePair
from mtcurate.dedup import (
    NormalizationPolicy,
    dedup_against,
    dedup_within,
    fingerprint,
    normalize,
    pair_key,
)
from mtcurate.errors import ConfigError


def _corpus(rows, name="c"):
    return Corpus(tuple(SentencePair.of(en, vi) for en, vi in rows), name)


def _texts(corpus):
    return [(p.en.text, p.vi.text) for p in corpus]


# --------------------------------------------------------------------------- #
# Normalization
# --------------------------------------------------------------------------- #
def test_normalize_examples():
    assert normalize("  Hello \t World  ") == "hello world"
    assert normalize("Tiếng VIỆT") == "tiếng việt"
    assert normalize("Straße") == "strasse"
    strict = NormalizationPolicy(strip_punct=True)
    assert normalize("Hello, world !", strict) == "hello world"


def test_decomposed_and_precomposed_vietnamese_match():
    precomposed = "Việt Nam"
    decomposed = unicodedata.normalize("NFD", precomposed)
    assert precomposed != decomposed
    assert normalize(precomposed) == normalize(decomposed)
    raw = NormalizationPolicy(unicode_canonical=False, casefold=False)
    assert normalize(precomposed, raw) != normalize(decomposed, raw)


def test_policy_parse():
    assert NormalizationPolicy.parse(None) == NormalizationPolicy()
    assert NormalizationPolicy.parse("nocasefold, strip-punct") == NormalizationPolicy(
        casefold=False, strip_punct=True
    )
    assert NormalizationPolicy.parse("no_unicode_canonical").unicode_canonical is False
    with pytest.raises(ConfigError):
        NormalizationPolicy.parse("stemming")


ALPHABET = "aAbBéÉéÉǰßẞ ,.!\t ệỆ"
policies = st.builds(
    NormalizationPolicy,
    unicode_canonical=st.booleans(),
    casefold=st.booleans(),
    collapse_whitespace=st.booleans(),
    strip_punct=st.booleans(),
)


@settings(max_examples=400, deadline=None)
@given(text=st.text(alphabet=ALPHABET, max_size=20))
def test_default_normalization_is_idempotent(text):
    once = normalize(text)
    assert normalize(once) == once


@settings(max_examples=300, deadline=None)
@given(text=st.text(alphabet=ALPHABET, max_size=20), policy=policies)
def test_canonical_policies_are_idempotent(text, policy):
    if not policy.unicode_canonical:
        return
    once = normalize(text, policy)
    assert normalize(once, policy) == once


def test_pair_key_keeps_sides_apart():
    policy = NormalizationPolicy()
    a = SentencePair.of("a b", "c")
    b = SentencePair.of("a", "b c")
    assert pair_key(a, policy) != pair_key(b, policy)


def test_fingerprint_is_seeded():
    assert fingerprint("k", 0) == fingerprint("k", 0)
    assert fingerprint("k", 0) != fingerprint("k", 1)
    assert len(fingerprint("k")) == 16
    with pytest.raises(ConfigError):
        fingerprint("k", -1)


# --------------------------------------------------------------------------- #
# Within-corpus
# --------------------------------------------------------------------------- #
def test_threefold_repeat_collapses_to_first_copies():
    rows = [(f"sentence {i}", f"câu {i}") for i in range(20)]
    deduped, report = dedup_within(_corpus(rows * 3))
    assert _texts(deduped) == rows
    assert report.input == 60 and report.kept == 20 and report.removed == 40


def test_quarter_duplicates_and_idempotence():
    rows = [(f"Pair number {i}", f"Cặp số {i}") for i in range(300)]
    variants = [(f"  PAIR   number {i} ", f"cặp SỐ {i}") for i in range(0, 300, 3)]
    corpus = _corpus(rows + variants)
    deduped, report = dedup_within(corpus)
    assert report.removed == 100
    assert report.removal_fraction == pytest.approx(0.25)
    assert _texts(deduped) == rows

    again, second = dedup_within(deduped)
    assert _texts(again) == rows
    assert second.removed == 0


def test_same_english_different_vietnamese_is_kept():
    deduped, report = dedup_within(_corpus([("bank", "ngân hàng"), ("bank", "bờ sông")]))
    assert report.removed == 0 and len(deduped) == 2


def test_policy_controls_what_counts_as_duplicate():
    corpus = _corpus([("Hello", "Xin chào"), ("hello", "xin chào"), ("hello!", "xin chào")])
    assert dedup_within(corpus)[1].kept == 2
    assert dedup_within(corpus, NormalizationPolicy(casefold=False))[1].kept == 3
    assert dedup_within(corpus, NormalizationPolicy(strip_punct=True))[1].kept == 1


def test_empty_corpus():
    deduped, report = dedup_within(Corpus())
    assert len(deduped) == 0
    assert report.removal_fraction == 0.0


rows_strategy = st.lists(
    st.tuples(st.sampled_from(["a", "A", "b", "a b", "B  a"]), st.sampled_from(["x", "X", "y", "x y"])),
    max_size=60,
)


@settings(max_examples=150, deadline=None)
@given(rows=rows_strategy, shards=st.integers(min_value=1, max_value=7), workers=st.sampled_from([1, 4]))
def test_sharding_workers_and_paranoid_mode_agree(rows, shards, workers):
    corpus = _corpus(rows)
    baseline, _ = dedup_within(corpus)
    for paranoid in (False, True):
        got, _ = dedup_within(corpus, paranoid=paranoid, shards=shards, workers=workers)
        assert got.pairs == baseline.pairs


def test_bad_shard_count():
    with pytest.raises(ConfigError):
        dedup_within(_corpus([("a", "b")]), shards=0)


# --------------------------------------------------------------------------- #
# Against another corpus
# --------------------------------------------------------------------------- #
def test_dedup_against_removes_test_overlap():
    train = _corpus(
        [
            ("Good morning", "Chào buổi sáng"),
            ("Thank you", "Cảm ơn"),
            ("good  MORNING", "chào buổi sáng"),
            ("Bye", "Tạm biệt"),
        ]
    )
    test = _corpus([("Thank you", "Cảm ơn"), ("Unrelated", "Không liên quan")])
    kept, report = dedup_against(train, test)
    assert _texts(kept) == [("Good morning", "Chào buổi sáng"), ("Bye", "Tạm biệt")]
    assert report.to_dict() == {"input": 4, "within_removed": 1, "overlap": 1, "kept": 2}


def test_dedup_against_itself_keeps_nothing():
    corpus = _corpus([("a", "b"), ("c", "d"), ("a", "b")])
    kept, report = dedup_against(corpus, corpus)
    assert len(kept) == 0
    assert report.kept + report.overlap == 2


@settings(max_examples=100, deadline=None)
@given(a=rows_strategy, b=rows_strategy, shards=st.integers(min_value=1, max_value=5))
def test_dedup_against_accounting(a, b, shards):
    corpus_a, corpus_b = _corpus(a, "a"), _corpus(b, "b")
    kept, report = dedup_against(corpus_a, corpus_b, shards=shards, paranoid=True)
    within, _ = dedup_within(corpus_a)
    assert report.kept + report.overlap == len(within)
    b_keys = {pair_key(p, NormalizationPolicy()) for p in corpus_b}
    assert all(pair_key(p, NormalizationPolicy()) not in b_keys for p in kept)
