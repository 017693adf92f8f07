"""
Scoring and top-K filtering of noisy parallel data.

Every pair gets a score from a pluggable scorer (a remote model loss, or the
self-contained roundtrip BLEU proxy), the best K pairs are kept, and K itself
is tuned by sweeping candidates against a held-out evaluator.
"""

from __future__ import annotations

import heapq
import json
import math
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple

from .aligner import pair_score
from .bleu import BleuConfig
from .checkpoint import ScoreCheckpoint
from .config import (
    DEFAULT_REMOTE_RETRIES,
    DEFAULT_REMOTE_TIMEOUT,
    DEFAULT_SCORE_BATCH,
)
from .corpus import Corpus, SentencePair, save
from .errors import (
    ConfigError,
    EvaluatorError,
    NonFiniteScoreError,
    RemoteError,
    SelectionRangeError,
    UnscoredPairError,
)
from .http_utils import SessionLike, build_session, post_json
from .logs import progress, stage_logger
from .translators import (
    EN_VI,
    VI_EN,
    BackendSpec,
    CachedTranslator,
    TranslationCache,
    build_backend,
)


log = stage_logger("filter")
score_log = stage_logger("score")

Evaluator = Callable[[Corpus], float]


# --------------------------------------------------------------------------- #
# Scorers
# --------------------------------------------------------------------------- #
class Scorer(Protocol):
    name: str
    higher_is_better: bool

    def score_batch(self, pairs: Sequence[SentencePair]) -> List[float]:  # pragma: no cover - protocol
        ...


class RoundtripBleuScorer:
    """Scores a pair by its bidirectional BLEU pair score (higher is better)."""

    name = "roundtrip_bleu"
    higher_is_better = True

    def __init__(self, translators: CachedTranslator, bleu_config: BleuConfig | None = None) -> None:
        self.translators = translators
        self.bleu_config = bleu_config or BleuConfig()

    def score_batch(self, pairs: Sequence[SentencePair]) -> List[float]:
        self.translators.warm(EN_VI, [p.en.text for p in pairs])
        self.translators.warm(VI_EN, [p.vi.text for p in pairs])
        return [pair_score(p.en, p.vi, self.translators, self.bleu_config) for p in pairs]


class RemoteLossScorer:
    """
    Per-pair loss from a scoring service (lower is better):

        POST {endpoint}/score {"pairs": [{"en": ..., "vi": ...}]} -> {"losses": [...]}

    Losses are used as returned; their normalization is the server's business.
    """

    name = "remote_loss"
    higher_is_better = False

    def __init__(
        self,
        endpoint: str,
        batch: int = DEFAULT_SCORE_BATCH,
        timeout: float = DEFAULT_REMOTE_TIMEOUT,
        retries: int = DEFAULT_REMOTE_RETRIES,
        session: Optional[SessionLike] = None,
    ) -> None:
        if batch < 1:
            raise ConfigError(f"batch must be >= 1, got {batch}", stage="score")
        self.url = endpoint.rstrip("/") + "/score"
        self.batch = batch
        self.timeout = timeout
        self.session = session if session is not None else build_session(retries)

    def score_batch(self, pairs: Sequence[SentencePair]) -> List[float]:
        losses: List[float] = []
        for i in range(0, len(pairs), self.batch):
            chunk = pairs[i : i + self.batch]
            data = post_json(
                self.session,
                self.url,
                {"pairs": [{"en": p.en.text, "vi": p.vi.text} for p in chunk]},
                self.timeout,
            )
            got = data.get("losses")
            if not isinstance(got, list) or len(got) != len(chunk):
                raise RemoteError(
                    f"{self.url}: expected {len(chunk)} losses, got "
                    f"{len(got) if isinstance(got, list) else type(got).__name__}",
                    url=self.url,
                )
            try:
                losses.extend(float(x) for x in got)
            except (TypeError, ValueError):
                raise RemoteError(f"{self.url}: non-numeric loss in response: {got!r}", url=self.url) from None
        return losses


def score_corpus(
    corpus: Corpus,
    scorer: Scorer,
    checkpoint: Optional[ScoreCheckpoint] = None,
    batch_size: int = DEFAULT_SCORE_BATCH,
    workers: int = 1,
) -> Corpus:
    """
    Attach a finite score to every pair, preserving order.

    With a checkpoint, already-scored indices are skipped and each finished
    batch is committed, so a failed run resumes where it stopped.
    """
    done: Dict[int, float] = {}
    if checkpoint is not None:
        checkpoint.bind(
            scorer=scorer.name, higher_is_better=scorer.higher_is_better, corpus_size=len(corpus)
        )
        done = checkpoint.load_scores()
        if done:
            score_log.info(f"resuming: {len(done)} of {len(corpus)} pairs already scored")

    todo = [i for i in range(len(corpus)) if i not in done]
    batches = [todo[i : i + batch_size] for i in range(0, len(todo), max(batch_size, 1))]

    def _run(batch: List[int]) -> Tuple[List[int], List[float]]:
        scores = scorer.score_batch([corpus[i] for i in batch])
        if len(scores) != len(batch):
            raise RemoteError(f"{scorer.name} returned {len(scores)} scores for {len(batch)} pairs")
        for idx, value in zip(batch, scores):
            if not math.isfinite(value):
                raise NonFiniteScoreError(idx, value)
        return batch, [float(s) for s in scores]

    def _collect(batch: List[int], scores: List[float]) -> None:
        done.update(zip(batch, scores))
        if checkpoint is not None:
            checkpoint.save_scores(zip(batch, scores))

    if workers <= 1 or len(batches) <= 1:
        for batch in progress(batches, desc="score", unit="batch"):
            _collect(*_run(batch))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for batch, scores in progress(pool.map(_run, batches), total=len(batches), desc="score", unit="batch"):
                _collect(batch, scores)

    score_log.info(
        f"scored {len(corpus)} pairs with {scorer.name} "
        f"(higher_is_better={scorer.higher_is_better})"
    )
    return corpus.with_pairs(p.with_score(done[i]) for i, p in enumerate(corpus))


# --------------------------------------------------------------------------- #
# Selection
# --------------------------------------------------------------------------- #
def _rank_key(corpus: Corpus, higher_is_better: bool) -> Callable[[int], Tuple[float, int]]:
    scores: List[float] = []
    for i, p in enumerate(corpus):
        if p.score is None:
            raise UnscoredPairError(i)
        scores.append(p.score)
    if higher_is_better:
        return lambda i: (-scores[i], i)
    return lambda i: (scores[i], i)


def select_top_k(scored: Corpus, k: int, higher_is_better: bool = True) -> Corpus:
    """
    The k best pairs, ties going to the earlier pair, in original order.

    Equivalent to the first k items of a stable sort by (score, position),
    computed with a bounded heap instead of a full sort.
    """
    key = _rank_key(scored, higher_is_better)
    n = len(scored)
    if not 0 <= k <= n:
        raise SelectionRangeError(f"k={k} outside 0..{n}", k=k, size=n)
    if k == n:
        return scored.with_pairs(scored.pairs)
    chosen = sorted(heapq.nsmallest(k, range(n), key=key))
    return scored.with_pairs(scored[i] for i in chosen)


@dataclass
class FilterReport:
    k_candidates: List[int]
    metric_per_k: List[float]
    chosen_k: Optional[int]
    threshold_score: Optional[float]
    higher_is_better: bool = True
    complete: bool = True
    error: Optional[str] = field(default=None)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, path: "str | Path") -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def threshold_score(selected: Corpus, higher_is_better: bool) -> Optional[float]:
    """Score of the K-th best (i.e. worst kept) pair."""
    scores = [p.score for p in selected if p.score is not None]
    if not scores:
        return None
    return min(scores) if higher_is_better else max(scores)


def tune_k(
    scored: Corpus,
    k_candidates: Sequence[int],
    evaluator: Evaluator,
    higher_is_better: bool = True,
    report_path: "str | Path | None" = None,
) -> FilterReport:
    """
    Evaluate select_top_k for each candidate K once; pick the best metric,
    preferring the smaller K on ties. On evaluator failure the partial report
    is written to `report_path` before EvaluatorError propagates.
    """
    if not k_candidates:
        raise SelectionRangeError("k_candidates must not be empty")
    n = len(scored)
    for k in k_candidates:
        if not 0 <= k <= n:
            raise SelectionRangeError(f"candidate k={k} outside 0..{n}", k=k, size=n)

    evaluated: List[int] = []
    metrics: List[float] = []
    for k in k_candidates:
        subset = select_top_k(scored, k, higher_is_better)
        try:
            metric = float(evaluator(subset))
            if not math.isfinite(metric):
                raise ValueError(f"non-finite metric {metric!r}")
        except Exception as exc:  # noqa: BLE001
            partial = FilterReport(
                k_candidates=evaluated,
                metric_per_k=metrics,
                chosen_k=None,
                threshold_score=None,
                higher_is_better=higher_is_better,
                complete=False,
                error=f"k={k}: {exc}",
            )
            if report_path is not None:
                partial.write(report_path)
            raise EvaluatorError(f"Evaluator failed for k={k}: {exc}", k=k) from exc
        log.info(f"k={k}: metric={metric}")
        evaluated.append(k)
        metrics.append(metric)

    best = max(range(len(evaluated)), key=lambda i: (metrics[i], -evaluated[i]))
    chosen = evaluated[best]
    report = FilterReport(
        k_candidates=evaluated,
        metric_per_k=metrics,
        chosen_k=chosen,
        threshold_score=threshold_score(select_top_k(scored, chosen, higher_is_better), higher_is_better),
        higher_is_better=higher_is_better,
    )
    if report_path is not None:
        report.write(report_path)
    return report


class CommandEvaluator:
    """
    Runs `cmd <candidate.jsonl>` and reads a single real number from stdout.

    The command typically trains a small model on the candidate corpus and
    reports BLEU on a held-out set.
    """

    def __init__(self, cmd: "str | Sequence[str]", timeout: Optional[float] = None) -> None:
        self.argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        if not self.argv:
            raise ConfigError("evaluator command is empty", stage="filter")
        self.timeout = timeout

    def __call__(self, candidate: Corpus) -> float:
        with tempfile.TemporaryDirectory(prefix="mtcurate-eval-") as tmp:
            path = save(candidate, Path(tmp) / "candidate.jsonl")
            proc = subprocess.run(
                [*self.argv, str(path)],
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=False,
            )
        if proc.returncode != 0:
            raise EvaluatorError(
                f"evaluator exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}",
                returncode=proc.returncode,
            )
        try:
            return float(proc.stdout.strip())
        except ValueError:
            raise EvaluatorError(
                f"evaluator printed {proc.stdout.strip()[:200]!r}, expected one number"
            ) from None


# --------------------------------------------------------------------------- #
# Scorer registry
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class ScorerSpec:
    """
    Which scorer to use.

    - remote:    `endpoint` of a scoring service returning per-pair losses
    - roundtrip: `backend` translator spec; pairs are scored by roundtrip BLEU
    """

    kind: str
    endpoint: Optional[str] = None
    batch: int = DEFAULT_SCORE_BATCH
    timeout: float = DEFAULT_REMOTE_TIMEOUT
    retries: int = DEFAULT_REMOTE_RETRIES
    backend: Optional[BackendSpec] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScorerSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"Scorer spec must be an object, got {data!r}")
        data = dict(data)
        if isinstance(data.get("backend"), dict):
            data["backend"] = BackendSpec.from_dict(data["backend"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"Invalid scorer spec: {exc}") from None


def _remote_scorer(spec: ScorerSpec, cache: Optional[TranslationCache]) -> Scorer:
    if not spec.endpoint:
        raise ConfigError("remote scorer needs an endpoint URL")
    return RemoteLossScorer(spec.endpoint, batch=spec.batch, timeout=spec.timeout, retries=spec.retries)


def _roundtrip_scorer(spec: ScorerSpec, cache: Optional[TranslationCache]) -> Scorer:
    if spec.backend is None:
        raise ConfigError("roundtrip scorer needs a translator backend")
    return RoundtripBleuScorer(CachedTranslator(build_backend(spec.backend), cache))


SCORERS: Dict[str, Callable[[ScorerSpec, Optional[TranslationCache]], Scorer]] = {
    "remote": _remote_scorer,
    "roundtrip": _roundtrip_scorer,
}


def build_scorer(spec: ScorerSpec, cache: Optional[TranslationCache] = None) -> Scorer:
    try:
        factory = SCORERS[spec.kind]
    except KeyError:
        raise ConfigError(
            f"Unknown scorer {spec.kind!r} (expected one of {sorted(SCORERS)})"
        ) from None
    return factory(spec, cache)
