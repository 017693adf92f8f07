from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from mtcurate.errors import CacheMissError, ConfigError, LexiconError, RemoteError
from mtcurate.translators import (
    EN_VI,
    VI_EN,
    BackendSpec,
    CacheBackend,
    CachedTranslator,
    Direction,
    LexiconBackend,
    RemoteBackend,
    TranslationCache,
    build_backend,
    list_backend_names,
    load_lexicon,
    translate,
    warm_cache,
)

from conftest import FakeResponse


def test_direction_parse_and_reverse():
    assert Direction.parse("en-vi") == EN_VI
    assert Direction.parse("vi->en") == VI_EN
    assert Direction.parse("EN→VI") == EN_VI
    assert EN_VI.reverse == VI_EN
    assert str(EN_VI) == "en->vi"
    with pytest.raises(ValueError):
        Direction.parse("en-en")
    with pytest.raises(ValueError):
        Direction("en", "fr")


# --------------------------------------------------------------------------- #
# Lexicon
# --------------------------------------------------------------------------- #
def test_lexicon_longest_match_and_passthrough():
    backend = LexiconBackend({"good": "tốt", "good morning": "chào buổi sáng", "cat": "mèo"})
    out = backend.translate(EN_VI, ["good morning cat", "good dog"])
    assert out == ["chào buổi sáng mèo", "tốt dog"]


def test_lexicon_reverse_direction_uses_inverted_table():
    backend = LexiconBackend({"cat": "mèo", "kitty": "mèo", "dog": "chó"})
    # first occurrence wins when two sources share a target
    assert backend.translate(VI_EN, ["mèo chó"]) == ["cat dog"]


def test_load_lexicon(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("# comment\ncat\tmèo\n\ndog\tchó\n", encoding="utf-8")
    assert load_lexicon(path) == {"cat": "mèo", "dog": "chó"}

    bad = tmp_path / "bad.tsv"
    bad.write_text("cat\tmèo\nbroken line\n", encoding="utf-8")
    with pytest.raises(LexiconError) as info:
        load_lexicon(bad)
    assert info.value.details["line_number"] == 2


def test_backend_rejects_empty_input():
    backend = LexiconBackend({})
    with pytest.raises(ValueError):
        backend.translate(EN_VI, ["ok", "   "])
    assert backend.translate(EN_VI, []) == []


# --------------------------------------------------------------------------- #
# Cache and gateway
# --------------------------------------------------------------------------- #
def test_cache_is_insert_once():
    cache = TranslationCache()
    assert cache.insert(EN_VI, " hello ", "xin chào") == "xin chào"
    assert cache.insert(EN_VI, "hello", "chào") == "xin chào"
    assert cache.get(EN_VI, "hello") == "xin chào"
    assert cache.get(VI_EN, "hello") is None
    assert len(cache) == 1


def test_cache_flush_appends_and_reloads(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = TranslationCache(path)
    cache.insert(EN_VI, "a", "x")
    assert cache.flush() == 1
    cache.insert(EN_VI, "b", "y")
    assert cache.flush() == 1
    assert cache.flush() == 0
    lines = path.read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["input"] for line in lines] == ["a", "b"]

    reloaded = TranslationCache(path)
    assert reloaded.get(EN_VI, "b") == "y"


def test_warm_cache_translates_each_distinct_sentence_once(identity_backend):
    cache = TranslationCache()
    stats = warm_cache(identity_backend, EN_VI, ["a", "b", "a", " b ", ""], cache)
    assert stats.distinct == 2
    assert stats.dispatched == 2
    assert identity_backend.calls == 2

    again = warm_cache(identity_backend, EN_VI, ["a", "c"], cache)
    assert again.already_cached == 1
    assert identity_backend.calls == 3


def test_translate_with_cache_preserves_order(identity_backend):
    cache = TranslationCache()
    assert translate(identity_backend, EN_VI, ["x", "y", "x"], cache) == ["x", "y", "x"]
    assert identity_backend.calls == 2


def test_cached_translator_lookup(identity_backend):
    translators = CachedTranslator(identity_backend)
    assert translators.lookup(EN_VI, "hello") == "hello"
    assert translators.lookup(EN_VI, "hello") == "hello"
    assert identity_backend.calls == 1


def test_cache_backend_strict_and_lenient():
    entries = {(EN_VI, "hello"): "xin chào"}
    strict = CacheBackend.from_entries(entries)
    assert strict.translate(EN_VI, ["hello"]) == ["xin chào"]
    with pytest.raises(CacheMissError):
        strict.translate(EN_VI, ["bye"])

    lenient = CacheBackend.from_entries(entries, strict=False)
    assert lenient.translate(EN_VI, ["bye"]) == ["bye"]
    assert lenient.misses == 1


def test_cache_backend_reads_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(
        json.dumps({"src": "vi", "dst": "en", "input": "mèo", "output": "cat"}, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    backend = CacheBackend(path)
    assert backend.translate(VI_EN, ["mèo"]) == ["cat"]


# --------------------------------------------------------------------------- #
# Remote
# --------------------------------------------------------------------------- #
def test_remote_backend_batches_requests(fake_session):
    def handler(url, payload):
        return FakeResponse(200, {"translations": [t.upper() for t in payload["texts"]]})

    session = fake_session(handler)
    backend = RemoteBackend("http://mt.local/", max_batch=2, concurrency=1, session=session)
    out = backend.translate(EN_VI, ["a", "b", "c", "d", "e"])
    assert out == ["A", "B", "C", "D", "E"]
    assert len(session.requests) == 3
    url, payload = session.requests[0]
    assert url == "http://mt.local/translate"
    assert payload["source_lang"] == "en" and payload["target_lang"] == "vi"


def test_remote_backend_concurrent_batches_keep_order(fake_session):
    session = fake_session(lambda url, p: FakeResponse(200, {"translations": list(p["texts"])}))
    backend = RemoteBackend("http://mt.local", max_batch=3, concurrency=4, session=session)
    texts = [f"s{i}" for i in range(20)]
    assert backend.translate(EN_VI, texts) == texts


def test_remote_backend_bounds_in_flight_requests_across_callers(fake_session):
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def handler(url, payload):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.01)
        with lock:
            state["now"] -= 1
        return FakeResponse(200, {"translations": list(payload["texts"])})

    backend = RemoteBackend("http://mt.local", max_batch=1, concurrency=2, session=fake_session(handler))
    # eight callers, as when align workers share one backend
    with ThreadPoolExecutor(max_workers=8) as pool:
        outputs = list(pool.map(lambda i: backend.translate(EN_VI, [f"d{i}-{j}" for j in range(4)]), range(8)))
    assert outputs[3] == [f"d3-{j}" for j in range(4)]
    assert 1 <= state["peak"] <= 2
    assert backend.calls == 32


@pytest.mark.parametrize(
    "response",
    [
        FakeResponse(500, {}),
        FakeResponse(200, {"translations": ["only one"]}),
        FakeResponse(200, raw="not json"),
        FakeResponse(200, ["a", "list"]),
    ],
)
def test_remote_backend_errors(fake_session, response):
    backend = RemoteBackend("http://mt.local", session=fake_session(lambda url, p: response))
    with pytest.raises(RemoteError):
        backend.translate(EN_VI, ["a", "b"])


# --------------------------------------------------------------------------- #
# Registry
# --------------------------------------------------------------------------- #
def test_build_backend(tmp_path):
    lex = tmp_path / "lex.tsv"
    lex.write_text("cat\tmèo\n", encoding="utf-8")
    backend = build_backend(BackendSpec.from_dict({"kind": "lexicon", "path": str(lex)}))
    assert backend.translate(EN_VI, ["cat"]) == ["mèo"]

    reversed_lex = build_backend(
        BackendSpec.from_dict({"kind": "lexicon", "path": str(lex), "lexicon_direction": "vi-en"})
    )
    assert reversed_lex.translate(VI_EN, ["cat"]) == ["mèo"]

    assert set(list_backend_names()) == {"lexicon", "cache", "remote"}
    with pytest.raises(ConfigError):
        build_backend(BackendSpec(kind="nope"))
    with pytest.raises(ConfigError):
        build_backend(BackendSpec(kind="remote"))
    with pytest.raises(ConfigError):
        BackendSpec.from_dict({"kind": "lexicon", "colour": "blue"})
