from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from ..config import (
    DEFAULT_REMOTE_CONCURRENCY,
    DEFAULT_REMOTE_MAX_BATCH,
    DEFAULT_REMOTE_RETRIES,
    DEFAULT_REMOTE_TIMEOUT,
)
from ..errors import ConfigError, RemoteError
from ..http_utils import SessionLike, build_session, post_json
from .base import Direction, TranslatorBackend


class RemoteBackend(TranslatorBackend):
    """
    Client for a translation service:

        POST {endpoint}/translate
        {"source_lang": "en", "target_lang": "vi", "texts": [...]}
        -> 200 {"translations": [...]}

    Requests carry at most `max_batch` texts; at most `concurrency` batches
    are in flight across every thread sharing this backend (align workers
    included). Decoding settings are left to the server.
    """

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_REMOTE_TIMEOUT,
        max_batch: int = DEFAULT_REMOTE_MAX_BATCH,
        retries: int = DEFAULT_REMOTE_RETRIES,
        concurrency: int = DEFAULT_REMOTE_CONCURRENCY,
        session: Optional[SessionLike] = None,
    ) -> None:
        super().__init__()
        if max_batch < 1:
            raise ConfigError(f"max_batch must be >= 1, got {max_batch}", stage="translate")
        self.url = endpoint.rstrip("/") + "/translate"
        self.timeout = timeout
        self.max_batch = max_batch
        self.concurrency = max(concurrency, 1)
        self.batch_size = max_batch * self.concurrency
        self.session = session if session is not None else build_session(retries)
        self._in_flight = threading.BoundedSemaphore(self.concurrency)

    def _post_batch(self, direction: Direction, texts: List[str]) -> List[str]:
        with self._in_flight:
            data = post_json(
                self.session,
                self.url,
                {"source_lang": direction.src, "target_lang": direction.dst, "texts": texts},
                self.timeout,
            )
        translations = data.get("translations")
        if not isinstance(translations, list) or len(translations) != len(texts):
            got = len(translations) if isinstance(translations, list) else type(translations).__name__
            raise RemoteError(
                f"{self.url}: expected {len(texts)} translations, got {got}",
                url=self.url,
            )
        return [str(t) for t in translations]

    def _translate(self, direction: Direction, texts: List[str]) -> List[str]:
        batches = [texts[i : i + self.max_batch] for i in range(0, len(texts), self.max_batch)]
        if self.concurrency == 1 or len(batches) == 1:
            results = [self._post_batch(direction, b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
                results = list(pool.map(lambda b: self._post_batch(direction, b), batches))
        return [t for batch in results for t in batch]
