"""
Translation oracles and the shared translation cache.

Backends:
- lexicon: bilingual phrase table, unknown tokens pass through
- cache:   precomputed translations from a cache JSONL file
- remote:  batched HTTP translation service
"""

from .base import EN_VI, VI_EN, Direction, TranslatorBackend
from .cache import CacheBackend, TranslationCache
from .gateway import CachedTranslator, CacheStats, translate, warm_cache
from .lexicon import LexiconBackend, load_lexicon
from .registry import BackendSpec, build_backend, list_backend_names
from .remote import RemoteBackend

__all__ = [
    "EN_VI",
    "VI_EN",
    "BackendSpec",
    "CacheBackend",
    "CacheStats",
    "CachedTranslator",
    "Direction",
    "LexiconBackend",
    "RemoteBackend",
    "TranslationCache",
    "TranslatorBackend",
    "build_backend",
    "list_backend_names",
    "load_lexicon",
    "translate",
    "warm_cache",
]
