from __future__ import annotations

import sqlite3
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from .errors import ConfigError


class ScoreCheckpoint:
    """
    SQLite-backed store of per-pair scores, so an interrupted scoring run can
    resume where it stopped.
    """

    def __init__(self, db_path: "str | Path") -> None:
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.Lock()
        self._init_schema()

    # ------------------------------------------------------------------ #
    # Schema
    # ------------------------------------------------------------------ #
    def _init_schema(self) -> None:
        cur = self._conn.cursor()
        cur.execute(
            """
            CREATE TABLE IF NOT EXISTS scores (
                idx INTEGER PRIMARY KEY,
                score REAL NOT NULL
            )
            """
        )
        cur.execute(
            """
            CREATE TABLE IF NOT EXISTS meta (
                key TEXT PRIMARY KEY,
                value TEXT NOT NULL
            )
            """
        )
        self._conn.commit()

    # ------------------------------------------------------------------ #
    # Metadata
    # ------------------------------------------------------------------ #
    def set_meta(self, key: str, value: str) -> None:
        with self._lock:
            self._conn.execute(
                """
                INSERT INTO meta (key, value) VALUES (?, ?)
                ON CONFLICT(key) DO UPDATE SET value = excluded.value
                """,
                (key, value),
            )
            self._conn.commit()

    def get_meta(self, key: str) -> Optional[str]:
        with self._lock:
            row = self._conn.execute("SELECT value FROM meta WHERE key = ?", (key,)).fetchone()
        return row["value"] if row else None

    def bind(self, *, scorer: str, higher_is_better: bool, corpus_size: int) -> None:
        """Record what is being scored; refuse to resume a different job."""
        stored = self.get_meta("corpus_size")
        if stored is not None and int(stored) != corpus_size:
            raise ConfigError(
                f"Checkpoint {self.db_path} belongs to a corpus of {stored} pairs, "
                f"not {corpus_size}",
                path=str(self.db_path),
            )
        stored_scorer = self.get_meta("scorer")
        if stored_scorer is not None and stored_scorer != scorer:
            raise ConfigError(
                f"Checkpoint {self.db_path} was written by scorer {stored_scorer!r}, not {scorer!r}",
                path=str(self.db_path),
            )
        self.set_meta("corpus_size", str(corpus_size))
        self.set_meta("scorer", scorer)
        self.set_meta("higher_is_better", "1" if higher_is_better else "0")
        self.set_meta("updated_at", datetime.now(timezone.utc).isoformat())

    @property
    def higher_is_better(self) -> Optional[bool]:
        value = self.get_meta("higher_is_better")
        return None if value is None else value == "1"

    # ------------------------------------------------------------------ #
    # Scores
    # ------------------------------------------------------------------ #
    def load_scores(self) -> Dict[int, float]:
        with self._lock:
            rows = self._conn.execute("SELECT idx, score FROM scores").fetchall()
        return {row["idx"]: row["score"] for row in rows}

    def save_scores(self, items: Iterable[Tuple[int, float]]) -> None:
        with self._lock:
            self._conn.executemany(
                """
                INSERT INTO scores (idx, score) VALUES (?, ?)
                ON CONFLICT(idx) DO UPDATE SET score = excluded.score
                """,
                list(items),
            )
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "ScoreCheckpoint":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
