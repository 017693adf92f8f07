from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Sequence

from ..config import LANGS
from ..errors import ConfigError


@dataclass(frozen=True, order=True)
class Direction:
    src: str
    dst: str

    def __post_init__(self) -> None:
        if self.src not in LANGS or self.dst not in LANGS:
            raise ConfigError(f"Unsupported direction {self.src}->{self.dst}")
        if self.src == self.dst:
            raise ConfigError(f"Direction needs two languages, got {self.src}->{self.dst}")

    @classmethod
    def parse(cls, text: str) -> "Direction":
        """Accepts 'en-vi', 'en->vi' or 'en→vi'."""
        for sep in ("->", "→", "-"):
            if sep in text:
                src, dst = text.split(sep, 1)
                return cls(src.strip().lower(), dst.strip().lower())
        raise ConfigError(f"Cannot parse direction {text!r}")

    @property
    def reverse(self) -> "Direction":
        return Direction(self.dst, self.src)

    def __str__(self) -> str:
        return f"{self.src}->{self.dst}"


EN_VI = Direction("en", "vi")
VI_EN = Direction("vi", "en")


class TranslatorBackend(ABC):
    """
    A translation oracle t_{src->dst}.

    Subclasses implement `_translate`; the public `translate` validates input
    and keeps `calls`, the number of sentences actually sent to the backend.
    Backends must be safe for concurrent use.
    """

    name: str = "backend"
    # Preferred dispatch size for cache warming.
    batch_size: int = 1024

    def __init__(self) -> None:
        self._calls = 0
        self._calls_lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def translate(self, direction: Direction, texts: Sequence[str]) -> List[str]:
        for i, text in enumerate(texts):
            if not text.strip():
                raise ValueError(f"Cannot translate empty text (item {i})")
        if not texts:
            return []
        with self._calls_lock:
            self._calls += len(texts)
        out = self._translate(direction, list(texts))
        if len(out) != len(texts):
            raise RuntimeError(
                f"{self.name} returned {len(out)} translations for {len(texts)} inputs"
            )
        return out

    @abstractmethod
    def _translate(self, direction: Direction, texts: List[str]) -> List[str]:  # pragma: no cover - abstract
        ...
