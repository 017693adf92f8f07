from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..errors import CacheMissError, MalformedRecordError, MissingFileError
from ..logs import stage_logger
from .base import Direction, TranslatorBackend


log = stage_logger("translate")

CacheKey = Tuple[str, str, str]


def cache_key(direction: Direction, text: str) -> CacheKey:
    return (direction.src, direction.dst, text.strip())


def _read_cache_file(path: Path) -> List[Tuple[CacheKey, str]]:
    rows: List[Tuple[CacheKey, str]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = cache_key(Direction(rec["src"], rec["dst"]), rec["input"])
                output = rec["output"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
                raise MalformedRecordError(str(path), lineno, f"bad cache entry ({exc})") from None
            if not isinstance(output, str):
                raise MalformedRecordError(str(path), lineno, "cache output must be a string")
            rows.append((key, output))
    return rows


class TranslationCache:
    """
    Insert-once map (direction, trimmed source text) -> translation.

    Reads are lock-free; insertions are serialized, and the first value stored
    for a key is the one every reader sees for the rest of the run. When a
    path is set, `flush()` appends entries added since the last flush as
    JSONL lines {"src", "dst", "input", "output"}.
    """

    def __init__(self, path: "str | Path | None" = None) -> None:
        self.path = Path(path) if path else None
        self._entries: Dict[CacheKey, str] = {}
        self._pending: List[CacheKey] = []
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path and self.path.exists():
            for key, output in _read_cache_file(self.path):
                self._entries.setdefault(key, output)
            log.info(f"loaded {len(self._entries)} cached translations from {self.path}")

    def __len__(self) -> int:
        return len(self._entries)

    def contains(self, direction: Direction, text: str) -> bool:
        return cache_key(direction, text) in self._entries

    def get(self, direction: Direction, text: str) -> Optional[str]:
        value = self._entries.get(cache_key(direction, text))
        with self._lock:
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def insert(self, direction: Direction, text: str, output: str) -> str:
        key = cache_key(direction, text)
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                return existing
            self._entries[key] = output
            self._pending.append(key)
            return output

    def flush(self) -> int:
        if self.path is None:
            return 0
        with self._lock:
            pending, self._pending = self._pending, []
            if not pending:
                return 0
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8", newline="\n") as fh:
                for src, dst, text in pending:
                    fh.write(
                        json.dumps(
                            {"src": src, "dst": dst, "input": text, "output": self._entries[(src, dst, text)]},
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
        return len(pending)


class CacheBackend(TranslatorBackend):
    """
    Serves translations precomputed elsewhere (a cache JSONL file).

    In strict mode a miss is an error; otherwise the source text is returned
    unchanged and counted in `misses`.
    """

    name = "cache"

    def __init__(self, path: "str | Path", strict: bool = True) -> None:
        super().__init__()
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"No such cache file: {path}", stage="translate", path=str(path))
        self.strict = strict
        self.misses = 0
        self._entries: Dict[CacheKey, str] = {}
        for key, output in _read_cache_file(path):
            self._entries.setdefault(key, output)

    @classmethod
    def from_entries(
        cls, entries: Dict[Tuple[Direction, str], str], strict: bool = True
    ) -> "CacheBackend":
        backend = cls.__new__(cls)
        TranslatorBackend.__init__(backend)
        backend.strict = strict
        backend.misses = 0
        backend._entries = {cache_key(d, t): out for (d, t), out in entries.items()}
        return backend

    def _translate(self, direction: Direction, texts: List[str]) -> List[str]:
        out: List[str] = []
        for text in texts:
            hit = self._entries.get(cache_key(direction, text))
            if hit is None:
                if self.strict:
                    raise CacheMissError(text, str(direction))
                self.misses += 1
                hit = text
            out.append(hit)
        return out
