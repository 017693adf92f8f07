"""
Self-contained BLEU engine.

Sentence-level BLEU is the scoring primitive inside document alignment and
roundtrip quality scoring; corpus-level BLEU is the evaluation metric for
every report. Counts are aggregated before precision / brevity penalty are
computed, never averaged per sentence.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple


Ngram = Tuple[str, ...]
NgramCounts = Counter  # Counter[Ngram]


class Tokenizer(str, Enum):
    WHITESPACE = "whitespace"
    INTL = "intl"


class Smoothing(str, Enum):
    # add_k(1) for sentence-level BLEU, none for corpus-level BLEU
    DEFAULT = "default"
    NONE = "none"
    ADD_K = "add_k"


@dataclass(frozen=True)
class BleuConfig:
    max_n: int = 4
    case_sensitive: bool = True
    tokenizer: Tokenizer = Tokenizer.INTL
    smoothing: Smoothing = Smoothing.DEFAULT
    smoothing_k: float = 1.0

    def __post_init__(self) -> None:
        if self.max_n < 1:
            raise ValueError(f"max_n must be >= 1, got {self.max_n}")
        if self.smoothing_k <= 0:
            raise ValueError(f"smoothing k must be > 0, got {self.smoothing_k}")
        # Accept plain strings from config files / CLI flags.
        object.__setattr__(self, "tokenizer", Tokenizer(self.tokenizer))
        object.__setattr__(self, "smoothing", Smoothing(self.smoothing))

    def resolved(self, *, sentence_level: bool) -> "BleuConfig":
        if self.smoothing is not Smoothing.DEFAULT:
            return self
        chosen = Smoothing.ADD_K if sentence_level else Smoothing.NONE
        return BleuConfig(
            max_n=self.max_n,
            case_sensitive=self.case_sensitive,
            tokenizer=self.tokenizer,
            smoothing=chosen,
            smoothing_k=self.smoothing_k,
        )


@dataclass(frozen=True)
class BleuBreakdown:
    score: float
    precisions: Tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: Tuple[int, ...] = field(default=())
    totals: Tuple[int, ...] = field(default=())

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["precisions"] = list(self.precisions)
        data["matches"] = list(self.matches)
        data["totals"] = list(self.totals)
        return data


# --------------------------------------------------------------------------- #
# Tokenization
# --------------------------------------------------------------------------- #
def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _split_punct(chunk: str) -> List[str]:
    out: List[str] = []
    buf: List[str] = []
    for ch in chunk:
        if _is_punct(ch):
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def tokenize(text: str, config: BleuConfig | None = None) -> List[str]:
    """
    Whitespace mode splits on Unicode whitespace runs. Intl mode additionally
    makes every punctuation-category character a standalone token.
    """
    config = config or BleuConfig()
    if not config.case_sensitive:
        text = text.lower()
    chunks = text.split()
    if config.tokenizer is Tokenizer.WHITESPACE:
        return chunks
    tokens: List[str] = []
    for chunk in chunks:
        tokens.extend(_split_punct(chunk))
    return tokens


# --------------------------------------------------------------------------- #
# Counting
# --------------------------------------------------------------------------- #
def ngram_counts(tokens: Sequence[str], max_n: int) -> List[NgramCounts]:
    """Per-order n-gram counters, index 0 holding unigrams."""
    tokens = tuple(tokens)
    counts: List[NgramCounts] = []
    for n in range(1, max_n + 1):
        counts.append(
            Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))
        )
    return counts


@dataclass(frozen=True)
class SentenceStats:
    """Pre-tokenized sentence with its n-gram counts, reusable across cells."""

    length: int
    counts: Tuple[NgramCounts, ...]

    @classmethod
    def of(cls, text: str, config: BleuConfig) -> "SentenceStats":
        tokens = tokenize(text, config)
        return cls(length=len(tokens), counts=tuple(ngram_counts(tokens, config.max_n)))


def _clipped(hyp: NgramCounts, ref: NgramCounts) -> int:
    # min() is symmetric, so walk the smaller counter.
    small, large = (hyp, ref) if len(hyp) <= len(ref) else (ref, hyp)
    return sum(min(c, large[g]) for g, c in small.items() if g in large)


def match_stats(
    hyp: SentenceStats, ref: SentenceStats, max_n: int
) -> Tuple[List[int], List[int]]:
    matches = [_clipped(hyp.counts[n], ref.counts[n]) for n in range(max_n)]
    totals = [max(hyp.length - n, 0) for n in range(max_n)]
    return matches, totals


def brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / max(hyp_len, 1))


def bleu_from_counts(
    matches: Sequence[int],
    totals: Sequence[int],
    hyp_len: int,
    ref_len: int,
    config: BleuConfig,
) -> BleuBreakdown:
    """
    Score from aggregated counts; `config` must already be resolved.

    An unsmoothed order with no hypothesis n-grams is left out of the
    geometric mean (effective order), so segments shorter than `max_n`
    still score 100 against themselves.
    """
    add_k = config.smoothing is Smoothing.ADD_K
    k = config.smoothing_k
    precisions: List[float] = []
    effective: List[float] = []
    for order, (m, t) in enumerate(zip(matches, totals), start=1):
        if add_k and order >= 2:
            p = (m + k) / (t + k)
        elif t > 0:
            p = m / t
        else:
            precisions.append(0.0)
            continue
        precisions.append(p)
        effective.append(p)

    bp = brevity_penalty(hyp_len, ref_len)
    if hyp_len == 0 or not effective or min(effective) <= 0.0:
        score = 0.0
    else:
        log_mean = sum(math.log(p) for p in effective) / len(effective)
        score = 100.0 * bp * math.exp(log_mean)
    return BleuBreakdown(
        score=min(score, 100.0),
        precisions=tuple(precisions),
        brevity_penalty=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
        matches=tuple(matches),
        totals=tuple(totals),
    )


def sentence_bleu_stats(
    hyp: SentenceStats, ref: SentenceStats, config: BleuConfig
) -> BleuBreakdown:
    config = config.resolved(sentence_level=True)
    matches, totals = match_stats(hyp, ref, config.max_n)
    return bleu_from_counts(matches, totals, hyp.length, ref.length, config)


# --------------------------------------------------------------------------- #
# Public scorers
# --------------------------------------------------------------------------- #
def sentence_bleu(hyp: str, ref: str, config: BleuConfig | None = None) -> BleuBreakdown:
    config = (config or BleuConfig()).resolved(sentence_level=True)
    return sentence_bleu_stats(
        SentenceStats.of(hyp, config), SentenceStats.of(ref, config), config
    )


def corpus_bleu(
    hyps: Sequence[str], refs: Sequence[str], config: BleuConfig | None = None
) -> BleuBreakdown:
    if len(hyps) != len(refs):
        raise ValueError(
            f"Hypothesis/reference length mismatch: {len(hyps)} vs {len(refs)}"
        )
    if not hyps:
        raise ValueError("corpus_bleu needs at least one segment")

    config = (config or BleuConfig()).resolved(sentence_level=False)
    matches = [0] * config.max_n
    totals = [0] * config.max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hyps, refs):
        h = SentenceStats.of(hyp, config)
        r = SentenceStats.of(ref, config)
        m, t = match_stats(h, r, config.max_n)
        for n in range(config.max_n):
            matches[n] += m[n]
            totals[n] += t[n]
        hyp_len += h.length
        ref_len += r.length
    return bleu_from_counts(matches, totals, hyp_len, ref_len, config)
