from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..config import (
    DEFAULT_REMOTE_CONCURRENCY,
    DEFAULT_REMOTE_MAX_BATCH,
    DEFAULT_REMOTE_RETRIES,
    DEFAULT_REMOTE_TIMEOUT,
)
from ..errors import ConfigError
from .base import EN_VI, Direction, TranslatorBackend
from .cache import CacheBackend
from .lexicon import LexiconBackend
from .remote import RemoteBackend


@dataclass(frozen=True)
class BackendSpec:
    """
    Which translator to use; exactly one variant is active.

    - lexicon: `path` to a two-column TSV read as `lexicon_direction`
    - cache:   `path` to a cache JSONL, `strict` misses are errors
    - remote:  `endpoint` plus timeout / batching / retry knobs
    """

    kind: str
    path: Optional[Path] = None
    strict: bool = True
    lexicon_direction: Direction = EN_VI
    endpoint: Optional[str] = None
    timeout: float = DEFAULT_REMOTE_TIMEOUT
    max_batch: int = DEFAULT_REMOTE_MAX_BATCH
    retries: int = DEFAULT_REMOTE_RETRIES
    concurrency: int = DEFAULT_REMOTE_CONCURRENCY

    @classmethod
    def from_dict(cls, data: Dict) -> "BackendSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"Backend spec must be an object, got {data!r}")
        data = dict(data)
        if "path" in data and data["path"] is not None:
            data["path"] = Path(data["path"])
        if isinstance(data.get("lexicon_direction"), str):
            data["lexicon_direction"] = Direction.parse(data["lexicon_direction"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"Invalid backend spec: {exc}") from None


def _lexicon(spec: BackendSpec) -> TranslatorBackend:
    if spec.path is None:
        raise ConfigError("lexicon backend needs a path")
    return LexiconBackend.from_file(spec.path, spec.lexicon_direction)


def _cache(spec: BackendSpec) -> TranslatorBackend:
    if spec.path is None:
        raise ConfigError("cache backend needs a path")
    return CacheBackend(spec.path, strict=spec.strict)


def _remote(spec: BackendSpec) -> TranslatorBackend:
    if not spec.endpoint:
        raise ConfigError("remote backend needs an endpoint URL")
    return RemoteBackend(
        spec.endpoint,
        timeout=spec.timeout,
        max_batch=spec.max_batch,
        retries=spec.retries,
        concurrency=spec.concurrency,
    )


BACKENDS: Dict[str, Callable[[BackendSpec], TranslatorBackend]] = {
    "lexicon": _lexicon,
    "cache": _cache,
    "remote": _remote,
}


def list_backend_names() -> List[str]:
    return list(BACKENDS.keys())


def build_backend(spec: BackendSpec) -> TranslatorBackend:
    try:
        factory = BACKENDS[spec.kind]
    except KeyError:
        raise ConfigError(
            f"Unknown translator backend {spec.kind!r} (expected one of {list_backend_names()})"
        ) from None
    return factory(spec)
