from __future__ import annotations

import os


APP_NAME = "mtcurate"

# Overrides the translation-cache path for every subcommand.
CACHE_ENV_VAR = "MTCURATE_CACHE"

# Alignment
DEFAULT_MIN_PAIR_SCORE: float = 10.0  # on the 0-200 pair-score scale
MAX_DOC_SENTENCES: int = 20_000

# Randomized operations
DEFAULT_SEED: int = 13
DEFAULT_DEDUP_SEED: int = 0

# Remote translation / scoring services
DEFAULT_REMOTE_TIMEOUT: float = 30.0
DEFAULT_REMOTE_MAX_BATCH: int = 64
DEFAULT_REMOTE_RETRIES: int = 3
DEFAULT_REMOTE_CONCURRENCY: int = 4

DEFAULT_SCORE_BATCH: int = 256

# Supported language tags, English first.
LANGS = ("en", "vi")


def default_workers() -> int:
    return max(os.cpu_count() or 1, 1)
