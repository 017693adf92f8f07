from __future__ import annotations

import logging
import sys
from datetime import datetime, timezone
from typing import Any, Iterable, MutableMapping, Tuple, TypeVar

from tqdm import tqdm


ROOT_LOGGER = "mtcurate"

T = TypeVar("T")


class _StderrHandler(logging.StreamHandler):
    """Stream handler that always writes to the *current* sys.stderr."""

    def __init__(self) -> None:
        super().__init__(sys.stderr)

    @property  # type: ignore[override]
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value) -> None:
        pass


class KeyValueFormatter(logging.Formatter):
    """
    Renders one structured line per record:

        ts=2026-01-01T00:00:00+00:00 level=INFO stage=dedup msg="kept 10 pairs"
    """

    def format(self, record: logging.LogRecord) -> str:
        ts = datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(
            timespec="seconds"
        )
        stage = getattr(record, "stage", None) or record.name.rsplit(".", 1)[-1]
        message = record.getMessage().replace("\\", "\\\\").replace('"', '\\"')
        line = f'ts={ts} level={record.levelname} stage={stage} msg="{message}"'
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def configure_logging(level: str | int = "INFO") -> None:
    """Install the stderr handler on the package logger (idempotent)."""
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        if isinstance(handler, _StderrHandler):
            logger.removeHandler(handler)
    handler = _StderrHandler()
    handler.setFormatter(KeyValueFormatter())
    logger.addHandler(handler)
    logger.setLevel(level.upper() if isinstance(level, str) else level)


class _StageAdapter(logging.LoggerAdapter):
    def process(
        self, msg: Any, kwargs: MutableMapping[str, Any]
    ) -> Tuple[Any, MutableMapping[str, Any]]:
        extra = dict(kwargs.get("extra") or {})
        extra.setdefault("stage", self.extra["stage"])
        kwargs["extra"] = extra
        return msg, kwargs


def stage_logger(stage: str) -> logging.LoggerAdapter:
    return _StageAdapter(logging.getLogger(f"{ROOT_LOGGER}.{stage}"), {"stage": stage})


def progress(iterable: Iterable[T], **kwargs: Any) -> Iterable[T]:
    """Wrap with a tqdm bar when stderr is an interactive terminal."""
    if not sys.stderr.isatty():
        return iterable
    kwargs.setdefault("dynamic_ncols", True)
    kwargs.setdefault("leave", False)
    return tqdm(iterable, **kwargs)
