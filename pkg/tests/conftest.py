from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

import pytest

from mtcurate.corpus import Corpus, Document, DocumentPair, DomainTag, SentencePair
from mtcurate.translators import CachedTranslator, Direction, TranslationCache, TranslatorBackend


class IdentityBackend(TranslatorBackend):
    """Returns its input; counts calls like every backend."""

    name = "identity"

    def _translate(self, direction: Direction, texts: List[str]) -> List[str]:
        return list(texts)


class FakeResponse:
    def __init__(self, status_code: int = 200, payload: Any = None, raw: Optional[str] = None) -> None:
        self.status_code = status_code
        self._payload = payload
        self._raw = raw

    def json(self) -> Any:
        if self._raw is not None:
            return json.loads(self._raw)
        return self._payload


class FakeSession:
    """Stands in for requests.Session; `handler(url, payload)` builds the response."""

    def __init__(self, handler: Callable[[str, Dict[str, Any]], FakeResponse]) -> None:
        self.handler = handler
        self.requests: List[Tuple[str, Dict[str, Any]]] = []

    def post(self, url: str, json: Any = None, timeout: float = 0.0) -> FakeResponse:
        self.requests.append((url, json))
        return self.handler(url, json)


@dataclass
class SyntheticDocs:
    lexicon: Dict[str, str]
    pairs: List[DocumentPair]
    # True (en_index, vi_index) matches per document pair.
    truth: List[Set[Tuple[int, int]]]


def _synthetic_docs(
    n_docs: int = 50,
    sentences: int = 12,
    noise_rate: float = 0.2,
    seed: int = 0,
    vocab: int = 400,
) -> SyntheticDocs:
    rng = random.Random(seed)
    lexicon = {f"en{i}": f"vi{i}" for i in range(vocab)}
    pairs: List[DocumentPair] = []
    truth: List[Set[Tuple[int, int]]] = []
    for d in range(n_docs):
        true_en = [
            " ".join(f"en{rng.randrange(vocab)}" for _ in range(rng.randint(5, 9)))
            for _ in range(sentences)
        ]
        true_vi = [" ".join(lexicon[w] for w in s.split()) for s in true_en]

        def _inject(lines: List[str], tag: str) -> Tuple[List[str], List[int]]:
            # Noise words are outside the lexicon, so they never translate.
            n_noise = round(len(lines) * noise_rate / (1 - noise_rate))
            out: List[Optional[str]] = list(lines)
            for k in range(n_noise):
                noise = " ".join(f"{tag}noise{rng.randrange(10_000)}" for _ in range(rng.randint(4, 8)))
                out.insert(rng.randint(0, len(out)), noise + f" {tag}x{k}")
            positions = [i for i, line in enumerate(out) if line in set(lines)]
            return [str(x) for x in out], positions

        en_lines, en_pos = _inject(true_en, "e")
        vi_lines, vi_pos = _inject(true_vi, "v")
        domain = DomainTag.parse("law")
        pairs.append(
            DocumentPair(
                Document.from_lines(en_lines, "en", f"doc{d}.en", domain),
                Document.from_lines(vi_lines, "vi", f"doc{d}.vi", domain),
                f"doc{d}",
            )
        )
        truth.append(set(zip(en_pos, vi_pos)))
    return SyntheticDocs(lexicon, pairs, truth)


@pytest.fixture
def identity_backend() -> IdentityBackend:
    return IdentityBackend()


@pytest.fixture
def identity_translators(identity_backend: IdentityBackend) -> CachedTranslator:
    return CachedTranslator(identity_backend, TranslationCache())


@pytest.fixture
def synthetic_docs() -> Callable[..., SyntheticDocs]:
    return _synthetic_docs


@pytest.fixture
def fake_session() -> Callable[[Callable[[str, Dict[str, Any]], FakeResponse]], FakeSession]:
    return FakeSession


@pytest.fixture
def make_corpus() -> Callable[..., Corpus]:
    def _make(rows, name: str = "test") -> Corpus:
        pairs = []
        for row in rows:
            if isinstance(row, SentencePair):
                pairs.append(row)
            elif len(row) == 2:
                pairs.append(SentencePair.of(row[0], row[1]))
            else:
                en, vi, score = row
                pairs.append(SentencePair.of(en, vi, score=score))
        return Corpus(tuple(pairs), name)

    return _make


@pytest.fixture
def write_jsonl(tmp_path: Path) -> Callable[[str, List[Dict[str, Any]]], Path]:
    def _write(name: str, records: List[Dict[str, Any]]) -> Path:
        path = tmp_path / name
        path.write_text(
            "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8"
        )
        return path

    return _write


@pytest.fixture(autouse=True)
def _isolated_cache(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("MTCURATE_CACHE", raising=False)
