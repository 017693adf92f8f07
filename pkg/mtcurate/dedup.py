"""
Exact deduplication of sentence pairs on normalized keys.

A pair's key is its normalized English and Vietnamese text joined by a
record separator, so the same English with a different Vietnamese side is a
different pair. Keys are fingerprinted with a seeded 128-bit blake2b; the
`paranoid` mode additionally compares full keys inside each fingerprint
bucket.
"""

from __future__ import annotations

import hashlib
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .config import DEFAULT_DEDUP_SEED
from .corpus import Corpus, SentencePair
from .errors import ConfigError
from .logs import stage_logger


log = stage_logger("dedup")

KEY_SEPARATOR = "␞"


@dataclass(frozen=True)
class NormalizationPolicy:
    unicode_canonical: bool = True
    casefold: bool = True
    collapse_whitespace: bool = True
    strip_punct: bool = False

    @classmethod
    def parse(cls, flags: "str | None") -> "NormalizationPolicy":
        """
        Parse a comma-separated flag list such as ``"nocasefold,strip_punct"``.

        Each name switches its field on; a ``no`` prefix switches it off.
        An empty string or None gives the defaults.
        """
        values: Dict[str, bool] = {}
        for raw in (flags or "").split(","):
            name = raw.strip().lower().replace("-", "_")
            if not name:
                continue
            enabled = True
            if name.startswith("no") and name[2:].lstrip("_") in cls.__dataclass_fields__:
                name, enabled = name[2:].lstrip("_"), False
            if name not in cls.__dataclass_fields__:
                raise ConfigError(
                    f"Unknown normalization flag {raw.strip()!r} "
                    f"(expected one of {sorted(cls.__dataclass_fields__)})"
                )
            values[name] = enabled
        return cls(**values)

    def to_dict(self) -> Dict[str, bool]:
        return asdict(self)


def _strip_punct(text: str) -> str:
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def normalize(text: str, policy: NormalizationPolicy | None = None) -> str:
    policy = policy or NormalizationPolicy()
    if policy.unicode_canonical:
        text = unicodedata.normalize("NFC", text)
    if policy.casefold:
        text = text.casefold()
        # casefold may decompose (e.g. U+01F0)
        if policy.unicode_canonical:
            text = unicodedata.normalize("NFC", text)
    if policy.collapse_whitespace:
        text = " ".join(text.split())
    if policy.strip_punct:
        text = _strip_punct(text)
        if policy.unicode_canonical:
            text = unicodedata.normalize("NFC", text)
        if policy.collapse_whitespace:
            text = " ".join(text.split())
    return text


def pair_key(pair: SentencePair, policy: NormalizationPolicy) -> str:
    return normalize(pair.en.text, policy) + KEY_SEPARATOR + normalize(pair.vi.text, policy)


def fingerprint(key: str, seed: int = DEFAULT_DEDUP_SEED) -> bytes:
    if seed < 0:
        raise ConfigError(f"dedup seed must be >= 0, got {seed}")
    return hashlib.blake2b(
        key.encode("utf-8"), digest_size=16, key=seed.to_bytes(8, "little")
    ).digest()


class _KeySet:
    """Fingerprint set; with `paranoid`, a fingerprint maps to its full keys."""

    def __init__(self, paranoid: bool) -> None:
        self.paranoid = paranoid
        self._fps: Set[bytes] = set()
        self._buckets: Dict[bytes, Set[str]] = {}

    def __contains__(self, item: Tuple[bytes, str]) -> bool:
        fp, key = item
        if self.paranoid:
            return key in self._buckets.get(fp, ())
        return fp in self._fps

    def add(self, fp: bytes, key: str) -> bool:
        """Insert; False if it was already present."""
        if (fp, key) in self:
            return False
        if self.paranoid:
            self._buckets.setdefault(fp, set()).add(key)
        else:
            self._fps.add(fp)
        return True


# --------------------------------------------------------------------------- #
# Keying
# --------------------------------------------------------------------------- #
def _keys(
    corpus: Corpus, policy: NormalizationPolicy, seed: int, workers: int
) -> Tuple[List[str], List[bytes]]:
    pairs = corpus.pairs

    def _chunk(bounds: Tuple[int, int]) -> Tuple[List[str], List[bytes]]:
        keys = [pair_key(p, policy) for p in pairs[bounds[0] : bounds[1]]]
        return keys, [fingerprint(k, seed) for k in keys]

    n = len(pairs)
    if workers <= 1 or n < 2:
        return _chunk((0, n))
    step = max(1, -(-n // (workers * 4)))
    bounds = [(i, min(i + step, n)) for i in range(0, n, step)]
    keys: List[str] = []
    fps: List[bytes] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for k, f in pool.map(_chunk, bounds):
            keys.extend(k)
            fps.extend(f)
    return keys, fps


def _shard_of(fp: bytes, shards: int) -> int:
    return int.from_bytes(fp[:4], "big") % shards


def _first_occurrences(
    keys: Sequence[str],
    fps: Sequence[bytes],
    paranoid: bool,
    shards: int,
    workers: int,
    exclude: Optional[_KeySet] = None,
) -> List[int]:
    """Indices of first occurrences not in `exclude`, in original order."""
    if shards < 1:
        raise ConfigError(f"shards must be >= 1, got {shards}")
    members: List[List[int]] = [[] for _ in range(shards)]
    for i, fp in enumerate(fps):
        members[_shard_of(fp, shards)].append(i)

    def _scan(indices: List[int]) -> List[int]:
        seen = _KeySet(paranoid)
        kept = []
        for i in indices:
            if seen.add(fps[i], keys[i]) and (exclude is None or (fps[i], keys[i]) not in exclude):
                kept.append(i)
        return kept

    if workers <= 1 or shards == 1:
        survivors = [i for shard in members for i in _scan(shard)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            survivors = [i for kept in pool.map(_scan, members) for i in kept]
    survivors.sort()
    return survivors


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #
@dataclass
class DedupReport:
    input: int
    kept: int
    removed: int
    removal_fraction: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class OverlapReport:
    input: int
    within_removed: int
    overlap: int
    kept: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _select(corpus: Corpus, indices: Iterable[int]) -> Corpus:
    pairs = corpus.pairs
    return corpus.with_pairs(pairs[i] for i in indices)


def dedup_within(
    corpus: Corpus,
    policy: NormalizationPolicy | None = None,
    seed: int = DEFAULT_DEDUP_SEED,
    paranoid: bool = False,
    shards: int = 1,
    workers: int = 1,
) -> Tuple[Corpus, DedupReport]:
    """Keep the first occurrence of each normalized (en, vi) key."""
    policy = policy or NormalizationPolicy()
    keys, fps = _keys(corpus, policy, seed, workers)
    kept = _first_occurrences(keys, fps, paranoid, shards, workers)
    n = len(corpus)
    report = DedupReport(
        input=n,
        kept=len(kept),
        removed=n - len(kept),
        removal_fraction=(n - len(kept)) / n if n else 0.0,
    )
    log.info(f"within: kept {report.kept} of {n}, removed {report.removed} ({report.removal_fraction:.4f})")
    return _select(corpus, kept), report


def dedup_against(
    corpus_a: Corpus,
    corpus_b: Corpus,
    policy: NormalizationPolicy | None = None,
    seed: int = DEFAULT_DEDUP_SEED,
    paranoid: bool = False,
    shards: int = 1,
    workers: int = 1,
) -> Tuple[Corpus, OverlapReport]:
    """
    Pairs of `corpus_a` (after within-deduplication) whose key never occurs
    in `corpus_b`. kept + overlap equals the within-deduplicated size of A.
    """
    policy = policy or NormalizationPolicy()
    b_keys, b_fps = _keys(corpus_b, policy, seed, workers)
    reference = _KeySet(paranoid)
    for fp, key in zip(b_fps, b_keys):
        reference.add(fp, key)

    keys, fps = _keys(corpus_a, policy, seed, workers)
    unique = _first_occurrences(keys, fps, paranoid, shards, workers)
    kept = _first_occurrences(keys, fps, paranoid, shards, workers, exclude=reference)
    report = OverlapReport(
        input=len(corpus_a),
        within_removed=len(corpus_a) - len(unique),
        overlap=len(unique) - len(kept),
        kept=len(kept),
    )
    log.info(
        f"against: input={report.input} within_removed={report.within_removed} "
        f"overlap={report.overlap} kept={report.kept}"
    )
    return _select(corpus_a, kept), report
