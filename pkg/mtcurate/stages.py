"""
File-level stage runners shared by the CLI subcommands and `pipeline`.

Each runner reads its inputs from disk, calls the library function, writes
its outputs and returns a JSON-serializable summary. Running the stages one
by one from the shell and running them through a pipeline config therefore
produce the same files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from .aligner import AlignConfig, align_batch, aligned_pairs, load_manifest
from .bleu import BleuConfig, corpus_bleu
from .checkpoint import ScoreCheckpoint
from .config import DEFAULT_DEDUP_SEED, DEFAULT_SEED, default_workers
from .corpus import (
    Corpus,
    CorpusFormat,
    IngestSpec,
    export,
    ingest_many,
    load,
    merge,
    read_lines,
    sample_test_set,
    save,
    stats,
)
from .dedup import NormalizationPolicy, dedup_against, dedup_within
from .errors import ConfigError, LineCountMismatchError, MissingFileError
from .logs import stage_logger
from .quality import (
    CommandEvaluator,
    ScorerSpec,
    build_scorer,
    score_corpus,
    select_top_k,
    threshold_score,
    tune_k,
)
from .report import (
    EvalMatrix,
    budget_ratio,
    evaluate_matrix,
    load_curve,
    load_matrix_manifest,
    load_time_records,
    time_report,
)
from .translators import BackendSpec, CachedTranslator, TranslationCache, build_backend


log = stage_logger("pipeline")


@dataclass
class RunContext:
    """Global settings every stage sees."""

    workers: int = field(default_factory=default_workers)
    seed: int = DEFAULT_SEED
    # Translation cache file; None keeps the cache in memory for this run.
    cache: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.cache is not None:
            self.cache = Path(self.cache)

    def translation_cache(self) -> TranslationCache:
        return TranslationCache(self.cache)


def write_json(path: "str | Path", data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _require(path: "str | Path", stage: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"No such file: {path}", stage=stage, path=str(path))
    return path


# --------------------------------------------------------------------------- #
# Corpus stages
# --------------------------------------------------------------------------- #
def run_ingest(
    ctx: RunContext,
    inputs: Sequence[IngestSpec],
    out: "str | Path",
    out_format: "str | CorpusFormat" = CorpusFormat.JSONL,
) -> Dict[str, Any]:
    if not inputs:
        raise ConfigError("ingest needs at least one input", stage="ingest")
    corpus = ingest_many(inputs, workers=ctx.workers)
    written = export(corpus, out, out_format)
    return {"pairs": len(corpus), "out": [str(p) for p in written]}


def run_merge(ctx: RunContext, inputs: Sequence["str | Path"], out: "str | Path") -> Dict[str, Any]:
    corpora = [load(_require(p, "merge")) for p in inputs]
    merged = merge(corpora)
    save(merged, out)
    return {"pairs": len(merged), "inputs": [len(c) for c in corpora], "out": str(out)}


def run_stats(
    ctx: RunContext, input: "str | Path", bleu_config: BleuConfig | None = None
) -> Dict[str, Any]:
    return stats(load(_require(input, "stats")), bleu_config).to_dict()


def run_sample(
    ctx: RunContext,
    input: "str | Path",
    per_domain: Mapping[str, int],
    test_out: "str | Path",
    rest_out: "str | Path",
) -> Dict[str, Any]:
    test, rest = sample_test_set(load(_require(input, "sample")), per_domain, ctx.seed)
    save(test, test_out)
    save(rest, rest_out)
    return {"test": len(test), "rest": len(rest), "seed": ctx.seed}


def run_bleu(
    ctx: RunContext, hyp: "str | Path", ref: "str | Path", bleu_config: BleuConfig | None = None
) -> Dict[str, Any]:
    hyp_path, ref_path = _require(hyp, "bleu"), _require(ref, "bleu")
    hyps, refs = read_lines(hyp_path), read_lines(ref_path)
    if len(hyps) != len(refs):
        raise LineCountMismatchError(str(hyp_path), str(ref_path), len(hyps), len(refs))
    return corpus_bleu(hyps, refs, bleu_config).to_dict()


# --------------------------------------------------------------------------- #
# Alignment
# --------------------------------------------------------------------------- #
def run_align(
    ctx: RunContext,
    pairs: "str | Path",
    backend: BackendSpec,
    out: "str | Path",
    report: "str | Path | None" = None,
    config: AlignConfig | None = None,
    domain: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Align every document pair of a manifest. Matched sentences of all
    documents are written in manifest order; failed documents contribute
    nothing and are listed in the report.
    """
    documents = load_manifest(_require(pairs, "align"), default_domain=domain)
    translators = CachedTranslator(build_backend(backend), ctx.translation_cache())
    results, batch_report = align_batch(documents, translators, config, workers=ctx.workers)
    aligned = [
        sp
        for doc, result in zip(documents, results)
        if result is not None
        for sp in aligned_pairs(doc, result)
    ]
    save(Corpus(tuple(aligned), Path(pairs).stem), out)
    summary = batch_report.to_dict()
    if report is not None:
        write_json(report, summary)
    return summary


# --------------------------------------------------------------------------- #
# Scoring and filtering
# --------------------------------------------------------------------------- #
def run_score(
    ctx: RunContext,
    input: "str | Path",
    scorer: ScorerSpec,
    out: "str | Path",
    checkpoint: "str | Path | None" = None,
    batch_size: Optional[int] = None,
) -> Dict[str, Any]:
    corpus = load(_require(input, "score"))
    impl = build_scorer(scorer, ctx.translation_cache())
    kwargs: Dict[str, Any] = {"workers": ctx.workers}
    if batch_size is not None:
        kwargs["batch_size"] = batch_size
    if checkpoint is not None:
        with ScoreCheckpoint(checkpoint) as ckpt:
            scored = score_corpus(corpus, impl, checkpoint=ckpt, **kwargs)
    else:
        scored = score_corpus(corpus, impl, **kwargs)
    save(scored, out)
    return {"pairs": len(scored), "scorer": impl.name, "higher_is_better": impl.higher_is_better}


def run_filter(
    ctx: RunContext,
    input: "str | Path",
    out: "str | Path",
    k: Optional[int] = None,
    tune: Optional[Sequence[int]] = None,
    evaluator: Optional[str] = None,
    scorer: Optional[ScorerSpec] = None,
    higher_is_better: bool = True,
    report: "str | Path | None" = None,
    checkpoint: "str | Path | None" = None,
) -> Dict[str, Any]:
    """
    Keep the best K pairs. Pairs are scored first when a scorer is given;
    otherwise the input must already carry scores. K is either fixed or
    tuned over `tune` with the external `evaluator` command.
    """
    if (k is None) == (not tune):
        raise ConfigError("filter needs exactly one of k or tune-k candidates", stage="filter")
    if tune and not evaluator:
        raise ConfigError("tuning k needs an evaluator command", stage="filter")

    corpus = load(_require(input, "filter"))
    if scorer is not None:
        impl = build_scorer(scorer, ctx.translation_cache())
        higher_is_better = impl.higher_is_better
        if checkpoint is not None:
            with ScoreCheckpoint(checkpoint) as ckpt:
                corpus = score_corpus(corpus, impl, checkpoint=ckpt, workers=ctx.workers)
        else:
            corpus = score_corpus(corpus, impl, workers=ctx.workers)

    if tune:
        filter_report = tune_k(
            corpus, list(tune), CommandEvaluator(evaluator or ""), higher_is_better, report
        )
        chosen = filter_report.chosen_k
        assert chosen is not None
        selected = select_top_k(corpus, chosen, higher_is_better)
        summary = filter_report.to_dict()
    else:
        assert k is not None
        selected = select_top_k(corpus, k, higher_is_better)
        summary = {
            "k_candidates": [k],
            "metric_per_k": [],
            "chosen_k": k,
            "threshold_score": threshold_score(selected, higher_is_better),
            "higher_is_better": higher_is_better,
            "complete": True,
            "error": None,
        }
        if report is not None:
            write_json(report, summary)
    save(selected, out)
    return summary


# --------------------------------------------------------------------------- #
# Deduplication
# --------------------------------------------------------------------------- #
def run_dedup(
    ctx: RunContext,
    input: "str | Path",
    out: "str | Path",
    against: "str | Path | None" = None,
    policy: NormalizationPolicy | None = None,
    report: "str | Path | None" = None,
    paranoid: bool = False,
    shards: int = 1,
    dedup_seed: int = DEFAULT_DEDUP_SEED,
) -> Dict[str, Any]:
    corpus = load(_require(input, "dedup"))
    options = dict(policy=policy, seed=dedup_seed, paranoid=paranoid, shards=shards, workers=ctx.workers)
    if against is not None:
        kept, overlap = dedup_against(corpus, load(_require(against, "dedup")), **options)
        summary = overlap.to_dict()
    else:
        kept, removal = dedup_within(corpus, **options)
        summary = removal.to_dict()
    summary["policy"] = (policy or NormalizationPolicy()).to_dict()
    save(kept, out)
    if report is not None:
        write_json(report, summary)
    return summary


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #
def run_eval_matrix(
    ctx: RunContext,
    manifest: "str | Path",
    bleu_config: BleuConfig | None = None,
    out: "str | Path | None" = None,
) -> EvalMatrix:
    spec = load_matrix_manifest(manifest)
    if "cells" in spec:
        matrix = EvalMatrix.from_cells(spec["cells"])
    else:
        matrix = evaluate_matrix(spec["systems"], spec["refs"], bleu_config, workers=ctx.workers)
    if out is not None:
        write_json(out, matrix.to_dict())
    return matrix


def run_budget(
    ctx: RunContext,
    supervised: "str | Path",
    pretraining: "str | Path",
    target: float,
    out: "str | Path | None" = None,
):
    result = budget_ratio(
        load_curve(supervised, "supervised"), load_curve(pretraining, "pretraining"), target
    )
    if out is not None:
        write_json(out, result.to_dict())
    return result


def run_time_report(ctx: RunContext, records: "str | Path", out: "str | Path | None" = None):
    result = time_report(load_time_records(records))
    if out is not None:
        write_json(out, result.to_dict())
    return result


def ingest_specs(items: Sequence[Mapping[str, Any]]) -> List[IngestSpec]:
    """IngestSpec list from config dicts {path, format?, domain?, tier?}."""
    if not isinstance(items, (list, tuple)):
        raise ConfigError(f"ingest inputs must be a list, got {items!r}", stage="ingest")
    specs: List[IngestSpec] = []
    for item in items:
        if not isinstance(item, Mapping):
            raise ConfigError(f"ingest input {item!r} must be an object with a 'path'", stage="ingest")
        unknown = set(item) - {"path", "format", "domain", "tier"}
        if unknown or "path" not in item:
            raise ConfigError(
                f"Invalid ingest input {dict(item)!r}: needs 'path', allows format/domain/tier",
                stage="ingest",
            )
        try:
            tier = int(item.get("tier", 1))
        except (TypeError, ValueError):
            tier = 0
        if tier not in (1, 2, 3, 4):
            raise ConfigError(
                f"ingest input {item['path']}: tier {item.get('tier')!r} must be an integer in 1..4",
                stage="ingest",
            )
        specs.append(
            IngestSpec(
                path=Path(item["path"]),
                format=CorpusFormat.parse(item.get("format", "jsonl")),
                domain=item.get("domain"),
                tier=tier,
            )
        )
    return specs
