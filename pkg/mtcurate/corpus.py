"""
Parallel-corpus data model, file formats and corpus-level operations.

JSONL is the canonical interchange format; TSV and line-pair (`name.en` /
`name.vi`) are accepted for ingesting existing sources.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from .bleu import BleuConfig, tokenize
from .config import LANGS
from .errors import (
    ConfigError,
    InsufficientPairsError,
    LineCountMismatchError,
    MalformedRecordError,
    MissingFileError,
    UnknownFormatError,
)
from .logs import stage_logger


log = stage_logger("ingest")
sample_log = stage_logger("sample")

KNOWN_DOMAINS = (
    "law",
    "religion",
    "news",
    "medical",
    "ted",
    "subtitles",
    "software",
    "wiki",
)
# Columns of the multi-domain test set.
EVAL_DOMAINS = ("law", "religion", "news", "medical")

JSONL_FIELDS = ("en", "vi", "domain", "tier", "source", "score")
HISTOGRAM_BUCKET = 10


class CorpusFormat(str, Enum):
    LINE_PAIR = "line-pair"
    TSV = "tsv"
    JSONL = "jsonl"

    @classmethod
    def parse(cls, value: "str | CorpusFormat") -> "CorpusFormat":
        try:
            return cls(value)
        except ValueError:
            known = ", ".join(f.value for f in cls)
            raise UnknownFormatError(
                f"Unknown corpus format {value!r} (expected one of: {known})",
                format=str(value),
            ) from None


# --------------------------------------------------------------------------- #
# Domain types
# --------------------------------------------------------------------------- #
@dataclass(frozen=True, order=True)
class DomainTag:
    """
    One of the known domains, or other(<raw string>).

    Known names are matched case-insensitively; anything else is kept verbatim
    so heterogeneous upstream labels survive a round trip.
    """

    value: str

    @classmethod
    def parse(cls, raw: "str | DomainTag | None", default: "DomainTag | None" = None) -> "DomainTag":
        if isinstance(raw, DomainTag):
            return raw
        if raw is None or not str(raw).strip():
            return default or OTHER
        text = str(raw).strip()
        if text.lower() in KNOWN_DOMAINS:
            return cls(text.lower())
        return cls(text)

    @property
    def is_other(self) -> bool:
        return self.value not in KNOWN_DOMAINS

    def __str__(self) -> str:
        return self.value


OTHER = DomainTag("other")


@dataclass(frozen=True)
class Sentence:
    text: str
    lang: str

    def __post_init__(self) -> None:
        if self.lang not in LANGS:
            raise ValueError(f"Unsupported language tag {self.lang!r}")

    @property
    def is_blank(self) -> bool:
        return not self.text.strip()


@dataclass(frozen=True)
class Document:
    sentences: Tuple[Sentence, ...]
    source_id: str
    domain: DomainTag = OTHER

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        langs = {s.lang for s in self.sentences}
        if len(langs) > 1:
            raise ValueError(f"Document {self.source_id} mixes languages: {sorted(langs)}")
        for s in self.sentences:
            if s.is_blank:
                raise ValueError(f"Document {self.source_id} contains a blank sentence")

    @classmethod
    def from_lines(
        cls, lines: Iterable[str], lang: str, source_id: str, domain: DomainTag = OTHER
    ) -> "Document":
        sentences = [Sentence(line.strip(), lang) for line in lines if line.strip()]
        return cls(tuple(sentences), source_id, domain)

    @property
    def lang(self) -> Optional[str]:
        return self.sentences[0].lang if self.sentences else None

    @property
    def texts(self) -> List[str]:
        return [s.text for s in self.sentences]

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class DocumentPair:
    doc_en: Document
    doc_vi: Document
    pair_id: str

    def __post_init__(self) -> None:
        if self.doc_en.lang not in (None, "en"):
            raise ValueError(f"{self.pair_id}: doc_en holds {self.doc_en.lang} text")
        if self.doc_vi.lang not in (None, "vi"):
            raise ValueError(f"{self.pair_id}: doc_vi holds {self.doc_vi.lang} text")


@dataclass(frozen=True)
class SentencePair:
    en: Sentence
    vi: Sentence
    domain: DomainTag = OTHER
    tier: int = 1
    source_id: str = ""
    score: Optional[float] = None
    # Unknown JSONL keys, preserved on round trip.
    extra: Mapping[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if self.en.lang != "en" or self.vi.lang != "vi":
            raise ValueError("SentencePair needs an en sentence and a vi sentence")
        if self.en.is_blank or self.vi.is_blank:
            raise ValueError("SentencePair sides must be non-empty")
        if self.tier not in (1, 2, 3, 4):
            raise ValueError(f"tier must be in 1..4, got {self.tier!r}")
        if self.score is not None and not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score!r}")

    @classmethod
    def of(
        cls,
        en: str,
        vi: str,
        domain: "DomainTag | str | None" = None,
        tier: int = 1,
        source_id: str = "",
        score: Optional[float] = None,
        extra: Optional[Mapping[str, Any]] = None,
    ) -> "SentencePair":
        return cls(
            en=Sentence(en.strip(), "en"),
            vi=Sentence(vi.strip(), "vi"),
            domain=DomainTag.parse(domain),
            tier=tier,
            source_id=source_id,
            score=score,
            extra=dict(extra or {}),
        )

    def with_score(self, score: float) -> "SentencePair":
        return replace(self, score=float(score))

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "en": self.en.text,
            "vi": self.vi.text,
            "domain": self.domain.value,
            "tier": self.tier,
            "source": self.source_id,
        }
        if self.score is not None:
            record["score"] = self.score
        for key, value in self.extra.items():
            if key not in record:
                record[key] = value
        return record


@dataclass(frozen=True)
class Corpus:
    pairs: Tuple[SentencePair, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SentencePair]:
        return iter(self.pairs)

    def __getitem__(self, index: int) -> SentencePair:
        return self.pairs[index]

    def domains(self) -> List[DomainTag]:
        return sorted({p.domain for p in self.pairs})

    def filter_domain(self, domain: "DomainTag | str") -> "Corpus":
        tag = DomainTag.parse(domain)
        return Corpus(tuple(p for p in self.pairs if p.domain == tag), self.name)

    def with_pairs(self, pairs: Iterable[SentencePair]) -> "Corpus":
        return Corpus(tuple(pairs), self.name)


# --------------------------------------------------------------------------- #
# Ingestion
# --------------------------------------------------------------------------- #
def read_lines(path: Path) -> List[str]:
    # newline=None gives universal newlines, so CRLF input reads as LF.
    with path.open("r", encoding="utf-8", newline=None) as fh:
        return [line.rstrip("\n") for line in fh]


def line_pair_paths(path: "str | Path") -> Tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (".en", ".vi"):
        path = path.with_suffix("")
    return path.with_name(path.name + ".en"), path.with_name(path.name + ".vi")


def _parse_tier(raw: Any, path: Path, lineno: int) -> int:
    try:
        tier = int(raw)
    except (TypeError, ValueError):
        raise MalformedRecordError(str(path), lineno, f"tier {raw!r} is not an integer") from None
    if isinstance(raw, float) and not raw.is_integer():
        raise MalformedRecordError(str(path), lineno, f"tier {raw!r} is not an integer")
    if tier not in (1, 2, 3, 4):
        raise MalformedRecordError(str(path), lineno, f"tier {tier} outside 1..4")
    return tier


class _Collector:
    """Accumulates pairs and counts records dropped for blank sides."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self.pairs: List[SentencePair] = []
        self.blank = 0

    def add(self, en: str, vi: str, **meta: Any) -> None:
        if not en.strip() or not vi.strip():
            self.blank += 1
            return
        self.pairs.append(SentencePair.of(en, vi, **meta))

    def corpus(self, name: str) -> Corpus:
        if self.blank:
            log.warning(
                f"{self.path}: dropped {self.blank} record(s) with an empty side"
            )
        log.info(f"{self.path}: ingested {len(self.pairs)} pairs")
        return Corpus(tuple(self.pairs), name)


def _ingest_line_pair(path: Path, domain: DomainTag, tier: int) -> _Collector:
    en_path, vi_path = line_pair_paths(path)
    for p in (en_path, vi_path):
        if not p.exists():
            raise MissingFileError(f"Missing line-pair file {p}", stage="ingest", path=str(p))
    en_lines = read_lines(en_path)
    vi_lines = read_lines(vi_path)
    if len(en_lines) != len(vi_lines):
        raise LineCountMismatchError(str(en_path), str(vi_path), len(en_lines), len(vi_lines))
    collector = _Collector(en_path.with_suffix(""))
    source = en_path.with_suffix("").name
    for en, vi in zip(en_lines, vi_lines):
        collector.add(en, vi, domain=domain, tier=tier, source_id=source)
    return collector


def _looks_like_header(fields: Sequence[str]) -> bool:
    return len(fields) >= 2 and fields[0].strip().lower() == "en" and fields[1].strip().lower() == "vi"


def _ingest_tsv(path: Path, domain: DomainTag, tier: int) -> _Collector:
    collector = _Collector(path)
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            collector.blank += 1
            continue
        fields = line.split("\t")
        if lineno == 1 and _looks_like_header(fields):
            continue
        if not 2 <= len(fields) <= 4:
            raise MalformedRecordError(
                str(path), lineno, f"expected 2-4 tab-separated columns, got {len(fields)}"
            )
        row_domain = DomainTag.parse(fields[2], default=domain) if len(fields) >= 3 else domain
        row_tier = (
            _parse_tier(fields[3], path, lineno)
            if len(fields) == 4 and fields[3].strip()
            else tier
        )
        collector.add(fields[0], fields[1], domain=row_domain, tier=row_tier, source_id=path.name)
    return collector


def _ingest_jsonl(path: Path, domain: DomainTag, tier: int) -> _Collector:
    collector = _Collector(path)
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(str(path), lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise MalformedRecordError(str(path), lineno, "record is not a JSON object")
        en, vi = record.get("en"), record.get("vi")
        if not isinstance(en, str) or not isinstance(vi, str):
            raise MalformedRecordError(str(path), lineno, "fields 'en' and 'vi' must be strings")
        score = record.get("score")
        if score is not None:
            if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
                raise MalformedRecordError(str(path), lineno, f"score {score!r} is not a finite number")
            score = float(score)
        row_tier = _parse_tier(record["tier"], path, lineno) if record.get("tier") is not None else tier
        source = record.get("source")
        extra = {k: v for k, v in record.items() if k not in JSONL_FIELDS}
        collector.add(
            en,
            vi,
            domain=DomainTag.parse(record.get("domain"), default=domain),
            tier=row_tier,
            source_id=str(source) if source is not None else path.name,
            score=score,
            extra=extra,
        )
    return collector


_READERS = {
    CorpusFormat.LINE_PAIR: _ingest_line_pair,
    CorpusFormat.TSV: _ingest_tsv,
    CorpusFormat.JSONL: _ingest_jsonl,
}


def ingest(
    path: "str | Path",
    format: "str | CorpusFormat" = CorpusFormat.JSONL,
    default_domain: "DomainTag | str | None" = None,
    default_tier: int = 1,
) -> Corpus:
    """Read one corpus file (or line-pair basename); one pair per record, in file order."""
    fmt = CorpusFormat.parse(format)
    path = Path(path)
    if fmt is not CorpusFormat.LINE_PAIR and not path.exists():
        raise MissingFileError(f"No such corpus file: {path}", stage="ingest", path=str(path))
    if default_tier not in (1, 2, 3, 4):
        raise ConfigError(f"default tier must be in 1..4, got {default_tier}", stage="ingest")
    domain = DomainTag.parse(default_domain)
    collector = _READERS[fmt](path, domain, default_tier)
    name = path.with_suffix("").name if fmt is CorpusFormat.LINE_PAIR else path.stem
    return collector.corpus(name)


@dataclass(frozen=True)
class IngestSpec:
    path: Path
    format: CorpusFormat = CorpusFormat.JSONL
    domain: Optional[str] = None
    tier: int = 1


def ingest_many(specs: Sequence[IngestSpec], workers: int = 1) -> Corpus:
    """Ingest several sources concurrently; merge order follows `specs`."""
    def _one(spec: IngestSpec) -> Corpus:
        return ingest(spec.path, spec.format, spec.domain, spec.tier)

    if workers <= 1 or len(specs) <= 1:
        return merge([_one(s) for s in specs])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return merge(list(pool.map(_one, specs)))


def load(path: "str | Path") -> Corpus:
    return ingest(path, CorpusFormat.JSONL)


# --------------------------------------------------------------------------- #
# Export
# --------------------------------------------------------------------------- #
_FIELD_BREAKS = str.maketrans({"\t": " ", "\r": " ", "\n": " "})


def _clean_field(text: str) -> str:
    return text.translate(_FIELD_BREAKS)


def _flattened(corpus: Corpus) -> int:
    """Pairs whose text holds a tab or line break; line-based formats turn those into spaces."""
    return sum(
        1 for p in corpus if _clean_field(p.en.text) != p.en.text or _clean_field(p.vi.text) != p.vi.text
    )


def export(corpus: Corpus, path: "str | Path", format: "str | CorpusFormat" = CorpusFormat.JSONL) -> List[Path]:
    """Write `corpus`; returns the file(s) written. Output is UTF-8 with LF endings."""
    fmt = CorpusFormat.parse(format)
    path = Path(path)
    if fmt is not CorpusFormat.JSONL and (flattened := _flattened(corpus)):
        log.warning(
            f"{flattened} pair(s) contain tabs or line breaks; {fmt.value} export replaces them "
            f"with spaces (use jsonl to keep them)"
        )
    if fmt is CorpusFormat.LINE_PAIR:
        en_path, vi_path = line_pair_paths(path)
        en_path.parent.mkdir(parents=True, exist_ok=True)
        with en_path.open("w", encoding="utf-8", newline="\n") as fen, vi_path.open(
            "w", encoding="utf-8", newline="\n"
        ) as fvi:
            for p in corpus:
                fen.write(_clean_field(p.en.text) + "\n")
                fvi.write(_clean_field(p.vi.text) + "\n")
        return [en_path, vi_path]

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        if fmt is CorpusFormat.TSV:
            fh.write("en\tvi\tdomain\ttier\n")
            for p in corpus:
                fh.write(
                    "\t".join(
                        [_clean_field(p.en.text), _clean_field(p.vi.text), p.domain.value, str(p.tier)]
                    )
                    + "\n"
                )
        else:
            for p in corpus:
                fh.write(json.dumps(p.to_record(), ensure_ascii=False) + "\n")
    return [path]


def save(corpus: Corpus, path: "str | Path") -> Path:
    return export(corpus, path, CorpusFormat.JSONL)[0]


# --------------------------------------------------------------------------- #
# Corpus operations
# --------------------------------------------------------------------------- #
def merge(corpora: Sequence[Corpus], name: str = "") -> Corpus:
    """Concatenate in argument order. Duplicates are kept; dedup is explicit."""
    pairs: List[SentencePair] = []
    for c in corpora:
        pairs.extend(c.pairs)
    if not name:
        name = "+".join(c.name for c in corpora if c.name)
    return Corpus(tuple(pairs), name)


@dataclass
class StatsReport:
    total: int = 0
    per_domain: Dict[str, int] = field(default_factory=dict)
    per_tier: Dict[int, int] = field(default_factory=dict)
    tokens_en: int = 0
    tokens_vi: int = 0
    length_histogram_en: Dict[str, int] = field(default_factory=dict)
    length_histogram_vi: Dict[str, int] = field(default_factory=dict)

    def count(self, domain: "DomainTag | str") -> int:
        return self.per_domain.get(DomainTag.parse(domain).value, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total": self.total,
            "per_domain": dict(self.per_domain),
            "per_tier": {str(k): v for k, v in self.per_tier.items()},
            "tokens": {"en": self.tokens_en, "vi": self.tokens_vi},
            "length_histogram": {
                "en": dict(self.length_histogram_en),
                "vi": dict(self.length_histogram_vi),
            },
        }


def _bucket(length: int) -> Tuple[int, str]:
    lo = (length // HISTOGRAM_BUCKET) * HISTOGRAM_BUCKET
    return lo, f"{lo}-{lo + HISTOGRAM_BUCKET - 1}"


def _histogram(lengths: Iterable[int]) -> Dict[str, int]:
    buckets: Counter = Counter(_bucket(n) for n in lengths)
    return {label: buckets[(lo, label)] for lo, label in sorted(buckets)}


def stats(corpus: Corpus, bleu_config: BleuConfig | None = None) -> StatsReport:
    """Counts per domain and tier, BLEU-tokenizer token counts, length histograms."""
    bleu_config = bleu_config or BleuConfig()
    domains: Counter = Counter()
    tiers: Counter = Counter()
    en_lengths: List[int] = []
    vi_lengths: List[int] = []
    for p in corpus:
        domains[p.domain.value] += 1
        tiers[p.tier] += 1
        en_lengths.append(len(tokenize(p.en.text, bleu_config)))
        vi_lengths.append(len(tokenize(p.vi.text, bleu_config)))
    return StatsReport(
        total=len(corpus),
        per_domain=dict(sorted(domains.items())),
        per_tier=dict(sorted(tiers.items())),
        tokens_en=sum(en_lengths),
        tokens_vi=sum(vi_lengths),
        length_histogram_en=_histogram(en_lengths),
        length_histogram_vi=_histogram(vi_lengths),
    )


def sample_test_set(
    corpus: Corpus,
    per_domain: Mapping["DomainTag | str", int],
    seed: int,
) -> Tuple[Corpus, Corpus]:
    """
    Uniform sampling without replacement per domain.

    Returns (test, remainder); both keep the corpus order, and together they
    partition the corpus by position.
    """
    try:
        wanted = {DomainTag.parse(d): int(n) for d, n in per_domain.items()}
    except (TypeError, ValueError):
        raise ConfigError(f"sample sizes must be integers, got {dict(per_domain)!r}", stage="sample") from None
    by_domain: Dict[DomainTag, List[int]] = defaultdict(list)
    for idx, p in enumerate(corpus):
        by_domain[p.domain].append(idx)

    for domain, n in sorted(wanted.items()):
        if n < 0:
            raise ConfigError(f"negative sample size for {domain.value}: {n}", stage="sample", domain=domain.value)
        available = len(by_domain.get(domain, ()))
        if n > available:
            raise InsufficientPairsError(domain.value, n, available)

    rng = random.Random(seed)
    chosen: set[int] = set()
    for domain, n in sorted(wanted.items()):
        chosen.update(rng.sample(by_domain.get(domain, []), n))

    test = [p for i, p in enumerate(corpus) if i in chosen]
    rest = [p for i, p in enumerate(corpus) if i not in chosen]
    sample_log.info(f"sampled {len(test)} test pairs, {len(rest)} remain")
    return Corpus(tuple(test), f"{corpus.name}.test"), Corpus(tuple(rest), f"{corpus.name}.rest")
