from __future__ import annotations

from typing import Any, Dict, Optional


class MtcurateError(Exception):
    """
    Base class for every error the toolkit raises on purpose.

    `details` ends up in the machine-readable error JSON the CLI prints to
    stderr, so keep its values JSON-serializable.
    """

    stage: Optional[str] = None

    def __init__(self, message: str, *, stage: str | None = None, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        if stage is not None:
            self.stage = stage
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "error": type(self).__name__,
            "stage": self.stage,
            "message": self.message,
        }
        payload.update(self.details)
        return payload


# --------------------------------------------------------------------------- #
# Corpus ingestion / export
# --------------------------------------------------------------------------- #
class UnknownFormatError(MtcurateError):
    stage = "ingest"


class LineCountMismatchError(MtcurateError):
    stage = "ingest"

    def __init__(self, en_path: str, vi_path: str, en_count: int, vi_count: int) -> None:
        first = min(en_count, vi_count)
        super().__init__(
            f"Line-count mismatch: {en_path} has {en_count} lines, {vi_path} has "
            f"{vi_count} lines (first unpaired line index {first}).",
            en_count=en_count,
            vi_count=vi_count,
            first_divergent_index=first,
        )
        self.en_count = en_count
        self.vi_count = vi_count
        self.first_divergent_index = first


class MalformedRecordError(MtcurateError):
    stage = "ingest"

    def __init__(self, path: str, line_number: int, reason: str) -> None:
        super().__init__(
            f"Malformed record at {path}:{line_number}: {reason}",
            path=path,
            line_number=line_number,
        )
        self.line_number = line_number


class InsufficientPairsError(MtcurateError):
    stage = "sample"

    def __init__(self, domain: str, requested: int, available: int) -> None:
        shortfall = requested - available
        super().__init__(
            f"Domain {domain!r} has {available} pairs, {requested} requested "
            f"(short by {shortfall}).",
            domain=domain,
            requested=requested,
            available=available,
            shortfall=shortfall,
        )
        self.domain = domain
        self.shortfall = shortfall


class MissingFileError(MtcurateError):
    pass


# --------------------------------------------------------------------------- #
# Translation
# --------------------------------------------------------------------------- #
class TranslatorError(MtcurateError):
    stage = "translate"


class CacheMissError(TranslatorError):
    def __init__(self, text: str, direction: str) -> None:
        super().__init__(
            f"No cached {direction} translation for {text!r} (strict mode).",
            text=text,
            direction=direction,
        )
        self.text = text


class RemoteError(TranslatorError):
    pass


class LexiconError(TranslatorError):
    pass


# --------------------------------------------------------------------------- #
# Alignment / filtering
# --------------------------------------------------------------------------- #
class DocumentTooLongError(MtcurateError):
    stage = "align"


class UnscoredPairError(MtcurateError):
    stage = "filter"

    def __init__(self, index: int) -> None:
        super().__init__(f"Pair {index} has no score; run scoring first.", index=index)
        self.index = index


class NonFiniteScoreError(MtcurateError):
    stage = "score"

    def __init__(self, index: int, value: float) -> None:
        super().__init__(
            f"Scorer returned a non-finite score ({value!r}) for pair {index}.",
            index=index,
            value=repr(value),
        )
        self.index = index


class SelectionRangeError(MtcurateError):
    stage = "filter"


class EvaluatorError(MtcurateError):
    stage = "filter"


# --------------------------------------------------------------------------- #
# Reporting / configuration
# --------------------------------------------------------------------------- #
class ShapeMismatchError(MtcurateError):
    stage = "eval"


class BudgetError(MtcurateError):
    stage = "budget"


class ConfigError(MtcurateError, ValueError):
    """Invalid settings or arguments; still a ValueError for library callers."""

    stage = "config"
