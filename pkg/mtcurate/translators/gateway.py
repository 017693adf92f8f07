from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence

from ..logs import stage_logger
from .base import Direction, TranslatorBackend
from .cache import TranslationCache


log = stage_logger("translate")


@dataclass
class CacheStats:
    requested: int
    distinct: int
    already_cached: int
    dispatched: int
    cache_size: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def _chunks(items: List[str], size: int) -> Iterable[List[str]]:
    for i in range(0, len(items), max(size, 1)):
        yield items[i : i + size]


def warm_cache(
    backend: TranslatorBackend,
    direction: Direction,
    sentences: Sequence[str],
    cache: TranslationCache,
) -> CacheStats:
    """
    Translate every distinct sentence not yet cached, at most once each.

    Blank inputs are ignored. Work completed before a backend error stays in
    the cache (and in its file, when it has one).
    """
    distinct = list(dict.fromkeys(s.strip() for s in sentences if s.strip()))
    missing = [s for s in distinct if not cache.contains(direction, s)]
    dispatched = 0
    try:
        for chunk in _chunks(missing, backend.batch_size):
            outputs = backend.translate(direction, chunk)
            for text, output in zip(chunk, outputs):
                cache.insert(direction, text, output)
            dispatched += len(chunk)
    finally:
        cache.flush()
    if dispatched:
        log.debug(f"{direction}: translated {dispatched} new sentence(s) via {backend.name}")
    return CacheStats(
        requested=len(sentences),
        distinct=len(distinct),
        already_cached=len(distinct) - len(missing),
        dispatched=dispatched,
        cache_size=len(cache),
    )


def translate(
    backend: TranslatorBackend,
    direction: Direction,
    texts: Sequence[str],
    cache: Optional[TranslationCache] = None,
) -> List[str]:
    """Output is parallel to `texts`; with a cache, repeats are translated once."""
    for i, text in enumerate(texts):
        if not text.strip():
            raise ValueError(f"Cannot translate empty text (item {i})")
    if cache is None:
        return backend.translate(direction, [t.strip() for t in texts])
    warm_cache(backend, direction, texts, cache)
    out: List[str] = []
    for text in texts:
        value = cache.get(direction, text)
        assert value is not None, "warm_cache left a gap"
        out.append(value)
    return out


class CachedTranslator:
    """A backend bound to a cache: the translators handle the aligner and scorers use."""

    def __init__(self, backend: TranslatorBackend, cache: Optional[TranslationCache] = None) -> None:
        self.backend = backend
        self.cache = cache if cache is not None else TranslationCache()

    def translate(self, direction: Direction, texts: Sequence[str]) -> List[str]:
        return translate(self.backend, direction, texts, self.cache)

    def warm(self, direction: Direction, texts: Sequence[str]) -> CacheStats:
        return warm_cache(self.backend, direction, texts, self.cache)

    def lookup(self, direction: Direction, text: str) -> str:
        value = self.cache.get(direction, text)
        if value is None:
            value = self.translate(direction, [text])[0]
        return value
