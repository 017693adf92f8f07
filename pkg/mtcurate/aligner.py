"""
Dynamic-programming alignment of weakly-aligned document pairs.

For English sentences e_1..e_M and Vietnamese sentences v_1..v_N the table

    dp[m][n] = max(dp[m-1][n], dp[m][n-1], dp[m-1][n-1] + s(e_m, v_n))

is filled with s(e, v) = BLEU(e, t_vi->en(v)) + BLEU(t_en->vi(e), v) in
[0, 200]. A match is admitted only when s >= min_pair_score and s > 0, which
is what strips headers, footers and other unmatched sentences. The backtrace
recomputes the winning transition at each cell (no back-pointers), preferring
match, then skipping the Vietnamese sentence, then skipping the English one.
All indices are 0-based.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .bleu import BleuConfig, SentenceStats, sentence_bleu, sentence_bleu_stats
from .config import DEFAULT_MIN_PAIR_SCORE, MAX_DOC_SENTENCES
from .corpus import (
    Document,
    DocumentPair,
    DomainTag,
    Sentence,
    SentencePair,
    read_lines,
)
from .errors import ConfigError, DocumentTooLongError, MalformedRecordError, MissingFileError
from .logs import progress, stage_logger
from .translators import EN_VI, VI_EN, CachedTranslator


log = stage_logger("align")

ScoreFn = Callable[[int, int], float]

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class AlignConfig:
    bleu: BleuConfig = field(default_factory=BleuConfig)
    min_pair_score: float = DEFAULT_MIN_PAIR_SCORE
    max_sentences: int = MAX_DOC_SENTENCES
    # Half-width of the allowed band around the scaled diagonal; None = all cells.
    band: Optional[int] = None

    def __post_init__(self) -> None:
        if self.min_pair_score < 0:
            raise ConfigError(f"min_pair_score must be >= 0, got {self.min_pair_score}", stage="align")
        if self.band is not None and self.band < 0:
            raise ConfigError(f"band must be >= 0, got {self.band}", stage="align")


class Match(NamedTuple):
    en_index: int
    vi_index: int
    pair_score: float


@dataclass(frozen=True)
class AlignmentResult:
    matches: Tuple[Match, ...]
    skipped_en: Tuple[int, ...]
    skipped_vi: Tuple[int, ...]
    total_score: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "matches": [list(m) for m in self.matches],
            "skipped_en": list(self.skipped_en),
            "skipped_vi": list(self.skipped_vi),
            "total_score": self.total_score,
        }


@dataclass(frozen=True)
class DpTable:
    scores: np.ndarray

    @property
    def m(self) -> int:
        return self.scores.shape[0] - 1

    @property
    def n(self) -> int:
        return self.scores.shape[1] - 1


# --------------------------------------------------------------------------- #
# DP kernel
# --------------------------------------------------------------------------- #
def _band_check(m: int, n: int, band: Optional[int]) -> Callable[[int, int], bool]:
    if band is None or m == 0:
        return lambda i, j: True
    ratio = n / m
    return lambda i, j: abs(j - i * ratio) <= band


def fill_table(
    score: ScoreFn, m: int, n: int, min_pair_score: float, band: Optional[int] = None
) -> DpTable:
    """Fill dp[0..m][0..n]; `score` takes 0-based sentence indices."""
    in_band = _band_check(m, n, band)
    table = np.zeros((m + 1, n + 1), dtype=np.float64)
    prev: List[float] = [0.0] * (n + 1)
    for i in range(1, m + 1):
        row: List[float] = [0.0] * (n + 1)
        for j in range(1, n + 1):
            best = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
            if in_band(i, j):
                s = score(i - 1, j - 1)
                if s >= min_pair_score and s > 0:
                    cand = prev[j - 1] + s
                    if cand > best:
                        best = cand
            row[j] = best
        table[i, :] = row
        prev = row
    return DpTable(table)


def backtrace(
    table: DpTable, score: ScoreFn, min_pair_score: float, band: Optional[int] = None
) -> AlignmentResult:
    dp = table.scores
    in_band = _band_check(table.m, table.n, band)
    matches: List[Match] = []
    skipped_en: List[int] = []
    skipped_vi: List[int] = []
    i, j = table.m, table.n
    while i > 0 and j > 0:
        cur = dp[i, j]
        if in_band(i, j):
            s = score(i - 1, j - 1)
            if s >= min_pair_score and s > 0 and dp[i - 1, j - 1] + s == cur:
                matches.append(Match(i - 1, j - 1, s))
                i -= 1
                j -= 1
                continue
        if dp[i, j - 1] == cur:
            skipped_vi.append(j - 1)
            j -= 1
        else:
            skipped_en.append(i - 1)
            i -= 1
    skipped_en.extend(range(i - 1, -1, -1))
    skipped_vi.extend(range(j - 1, -1, -1))
    matches.reverse()
    skipped_en.reverse()
    skipped_vi.reverse()
    return AlignmentResult(
        matches=tuple(matches),
        skipped_en=tuple(skipped_en),
        skipped_vi=tuple(skipped_vi),
        total_score=float(dp[table.m, table.n]),
    )


def align_scores(
    score: ScoreFn,
    m: int,
    n: int,
    min_pair_score: float = DEFAULT_MIN_PAIR_SCORE,
    band: Optional[int] = None,
) -> AlignmentResult:
    """Optimal monotone one-to-one partial matching under an arbitrary score."""
    table = fill_table(score, m, n, min_pair_score, band)
    return backtrace(table, score, min_pair_score, band)


# --------------------------------------------------------------------------- #
# Bidirectional BLEU pair score
# --------------------------------------------------------------------------- #
def pair_score(
    e: Sentence, v: Sentence, translators: CachedTranslator, bleu_config: BleuConfig | None = None
) -> float:
    """s(e, v): BLEU of each side against the other side's translation, in [0, 200]."""
    config = (bleu_config or BleuConfig()).resolved(sentence_level=True)
    t_v = translators.lookup(VI_EN, v.text)
    t_e = translators.lookup(EN_VI, e.text)
    return sentence_bleu(t_v, e.text, config).score + sentence_bleu(t_e, v.text, config).score


class DocumentScorer:
    """
    s(e_m, v_n) for one document pair from pre-tokenized sentences.

    Construction warms the cache in both directions, so the backend sees at
    most M + N sentences; each cell is then two BLEU evaluations on cached
    n-gram counts.
    """

    def __init__(
        self, pair: DocumentPair, translators: CachedTranslator, bleu_config: BleuConfig
    ) -> None:
        self.config = bleu_config.resolved(sentence_level=True)
        en = pair.doc_en.texts
        vi = pair.doc_vi.texts
        en_stats = translators.warm(EN_VI, en)
        vi_stats = translators.warm(VI_EN, vi)
        self.translation_requests = en_stats.distinct + vi_stats.distinct

        def _stats(texts: Sequence[str]) -> List[SentenceStats]:
            return [SentenceStats.of(t, self.config) for t in texts]

        self.en = _stats(en)
        self.vi = _stats(vi)
        self.en_translated = _stats([translators.lookup(EN_VI, t) for t in en])
        self.vi_translated = _stats([translators.lookup(VI_EN, t) for t in vi])

    def __call__(self, m: int, n: int) -> float:
        cfg = self.config
        return (
            sentence_bleu_stats(self.vi_translated[n], self.en[m], cfg).score
            + sentence_bleu_stats(self.en_translated[m], self.vi[n], cfg).score
        )


def _check_length(pair: DocumentPair, limit: int) -> None:
    for side, doc in (("en", pair.doc_en), ("vi", pair.doc_vi)):
        if len(doc) > limit:
            raise DocumentTooLongError(
                f"{pair.pair_id}: {side} document has {len(doc)} sentences "
                f"(limit {limit}); split it into smaller documents before aligning",
                pair_id=pair.pair_id,
                sentences=len(doc),
                limit=limit,
            )


def _align(
    pair: DocumentPair, translators: CachedTranslator, config: AlignConfig
) -> Tuple[AlignmentResult, int]:
    _check_length(pair, config.max_sentences)
    scorer = DocumentScorer(pair, translators, config.bleu)
    result = align_scores(
        scorer, len(pair.doc_en), len(pair.doc_vi), config.min_pair_score, config.band
    )
    return result, scorer.translation_requests


def align_documents(
    pair: DocumentPair, translators: CachedTranslator, config: AlignConfig | None = None
) -> AlignmentResult:
    return _align(pair, translators, config or AlignConfig())[0]


# --------------------------------------------------------------------------- #
# Batches
# --------------------------------------------------------------------------- #
@dataclass
class DocumentReport:
    pair_id: str
    en_sentences: int
    vi_sentences: int
    matches: int = 0
    match_rate: float = 0.0
    total_score: float = 0.0
    translation_requests: int = 0
    error: Optional[Dict[str, Any]] = None


@dataclass
class AlignBatchReport:
    documents: List[DocumentReport]
    failures: int
    match_rates: List[float]
    match_rate_histogram: List[int]
    total_matches: int

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _error_dict(exc: Exception) -> Dict[str, Any]:
    to_dict = getattr(exc, "to_dict", None)
    if callable(to_dict):
        return to_dict()
    return {"error": type(exc).__name__, "message": str(exc)}


def _histogram(rates: Sequence[float]) -> List[int]:
    bins = [0] * HISTOGRAM_BINS
    for r in rates:
        bins[min(int(r * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)] += 1
    return bins


def align_batch(
    pairs: Sequence[DocumentPair],
    translators: CachedTranslator,
    config: AlignConfig | None = None,
    workers: int = 1,
) -> Tuple[List[Optional[AlignmentResult]], AlignBatchReport]:
    """
    Align many document pairs; results come back in input order.

    A failing document yields None and an error entry in the report; the rest
    of the batch still runs. Output does not depend on `workers`.
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}", stage="align")
    config = config or AlignConfig()

    def _one(pair: DocumentPair) -> Tuple[Optional[AlignmentResult], DocumentReport]:
        entry = DocumentReport(pair.pair_id, len(pair.doc_en), len(pair.doc_vi))
        try:
            result, requests = _align(pair, translators, config)
        except Exception as exc:  # noqa: BLE001
            log.warning(f"{pair.pair_id}: alignment failed: {exc}")
            entry.error = _error_dict(exc)
            return None, entry
        sizes = len(pair.doc_en) + len(pair.doc_vi)
        entry.matches = len(result.matches)
        entry.match_rate = 2 * len(result.matches) / sizes if sizes else 0.0
        entry.total_score = result.total_score
        entry.translation_requests = requests
        return result, entry

    if workers == 1:
        outcomes = [_one(p) for p in progress(pairs, desc="align", unit="doc")]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(progress(pool.map(_one, pairs), total=len(pairs), desc="align", unit="doc"))

    results = [r for r, _ in outcomes]
    entries = [e for _, e in outcomes]
    rates = [e.match_rate for e in entries if e.error is None]
    report = AlignBatchReport(
        documents=entries,
        failures=sum(1 for e in entries if e.error is not None),
        match_rates=rates,
        match_rate_histogram=_histogram(rates),
        total_matches=sum(e.matches for e in entries),
    )
    log.info(
        f"aligned {len(pairs) - report.failures}/{len(pairs)} documents, "
        f"{report.total_matches} matches, {translators.backend.calls} backend translations"
    )
    return results, report


def aligned_pairs(pair: DocumentPair, result: AlignmentResult) -> List[SentencePair]:
    """Tier-3 sentence pairs carrying their pair score and document positions."""
    domain = pair.doc_en.domain
    out: List[SentencePair] = []
    for m in result.matches:
        out.append(
            SentencePair(
                en=pair.doc_en.sentences[m.en_index],
                vi=pair.doc_vi.sentences[m.vi_index],
                domain=domain,
                tier=3,
                source_id=pair.pair_id,
                score=m.pair_score,
                extra={"en_index": m.en_index, "vi_index": m.vi_index},
            )
        )
    return out


# --------------------------------------------------------------------------- #
# Manifests
# --------------------------------------------------------------------------- #
def read_document(path: Path, lang: str, domain: DomainTag) -> Document:
    if not path.exists():
        raise MissingFileError(f"No such document: {path}", stage="align", path=str(path))
    return Document.from_lines(read_lines(path), lang, str(path), domain)


def load_manifest(path: "str | Path", default_domain: "str | None" = None) -> List[DocumentPair]:
    """
    TSV of `en-doc-path <TAB> vi-doc-path [<TAB> domain]`, one document pair per
    line. Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"No such manifest: {path}", stage="align", path=str(path))
    base = path.parent
    pairs: List[DocumentPair] = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) not in (2, 3):
            raise MalformedRecordError(str(path), lineno, "expected en-path<TAB>vi-path[<TAB>domain]")
        domain = DomainTag.parse(fields[2] if len(fields) == 3 else default_domain)
        en_path, vi_path = base / fields[0], base / fields[1]
        pairs.append(
            DocumentPair(
                doc_en=read_document(en_path, "en", domain),
                doc_vi=read_document(vi_path, "vi", domain),
                pair_id=fields[0],
            )
        )
    return pairs
