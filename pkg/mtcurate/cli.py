from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import typer

try:  # newer typer releases vendor click and raise their own exception classes
    from typer._click import exceptions as click_exceptions
except ImportError:
    from click import exceptions as click_exceptions

from . import __version__
from .aligner import AlignConfig
from .bleu import BleuConfig, Smoothing, Tokenizer
from .config import (
    APP_NAME,
    CACHE_ENV_VAR,
    DEFAULT_DEDUP_SEED,
    DEFAULT_MIN_PAIR_SCORE,
    DEFAULT_REMOTE_CONCURRENCY,
    DEFAULT_REMOTE_MAX_BATCH,
    DEFAULT_REMOTE_RETRIES,
    DEFAULT_REMOTE_TIMEOUT,
    DEFAULT_SCORE_BATCH,
    DEFAULT_SEED,
    default_workers,
)
from .corpus import CorpusFormat, IngestSpec
from .dedup import NormalizationPolicy
from .errors import ConfigError, MtcurateError
from .logs import configure_logging
from .pipeline import PipelineConfig, run_pipeline
from .quality import ScorerSpec
from .stages import (
    RunContext,
    run_align,
    run_bleu,
    run_budget,
    run_dedup,
    run_eval_matrix,
    run_filter,
    run_ingest,
    run_merge,
    run_sample,
    run_score,
    run_stats,
    run_time_report,
)
from .translators import BackendSpec, Direction, list_backend_names


app = typer.Typer(
    help="Build, clean and evaluate English-Vietnamese parallel corpora.",
    no_args_is_help=True,
    add_completion=False,
)


# --------------------------------------------------------------------------- #
# Helpers
# --------------------------------------------------------------------------- #
def _emit(data: Any) -> None:
    typer.echo(json.dumps(data, indent=2, ensure_ascii=False))


def _fail(payload: Dict[str, Any]) -> None:
    typer.echo(json.dumps(payload, ensure_ascii=False), err=True)
    raise typer.Exit(code=1)


def _guarded(fn: Callable[[], Any]) -> Any:
    """Run a command body; toolkit errors become error JSON on stderr and exit 1."""
    try:
        return fn()
    except MtcurateError as exc:
        _fail(exc.to_dict())


def _context(ctx: typer.Context) -> RunContext:
    return ctx.obj if isinstance(ctx.obj, RunContext) else RunContext()


def _bleu_config(max_n: int, lc: bool, tokenizer: str, smoothing: str) -> BleuConfig:
    try:
        return BleuConfig(max_n=max_n, case_sensitive=not lc, tokenizer=tokenizer, smoothing=smoothing)
    except ValueError as exc:
        raise ConfigError(f"Invalid BLEU settings: {exc}", stage="bleu") from None


def _backend_spec(
    kind: str,
    path: Optional[Path],
    endpoint: Optional[str],
    lexicon_direction: str,
    strict: bool,
    timeout: float,
    max_batch: int,
    retries: int,
    concurrency: int,
) -> BackendSpec:
    return BackendSpec(
        kind=kind,
        path=path,
        strict=strict,
        lexicon_direction=Direction.parse(lexicon_direction),
        endpoint=endpoint,
        timeout=timeout,
        max_batch=max_batch,
        retries=retries,
        concurrency=concurrency,
    )


def _scorer_spec(
    scorer: Optional[str],
    endpoint: Optional[str],
    backend: Optional[str],
    backend_path: Optional[Path],
    lexicon_direction: str,
    strict: bool,
    batch: int,
    timeout: float,
    retries: int,
) -> Optional[ScorerSpec]:
    if scorer is None:
        return None
    spec_backend = None
    if scorer == "roundtrip":
        spec_backend = _backend_spec(
            backend or "lexicon",
            backend_path,
            endpoint,
            lexicon_direction,
            strict,
            timeout,
            DEFAULT_REMOTE_MAX_BATCH,
            retries,
            DEFAULT_REMOTE_CONCURRENCY,
        )
    return ScorerSpec(
        kind=scorer,
        endpoint=endpoint,
        batch=batch,
        timeout=timeout,
        retries=retries,
        backend=spec_backend,
    )


def _parse_counts(items: List[str]) -> Dict[str, int]:
    """'law=500,news=500' (possibly repeated) -> {'law': 500, 'news': 500}."""
    counts: Dict[str, int] = {}
    for item in items:
        for part in item.split(","):
            if not part.strip():
                continue
            name, sep, value = part.partition("=")
            if not sep:
                raise ConfigError(f"Expected DOMAIN=COUNT, got {part!r}", stage="sample")
            try:
                counts[name.strip()] = int(value)
            except ValueError:
                raise ConfigError(f"Count for {name.strip()!r} is not an integer: {value!r}", stage="sample") from None
    return counts


def _parse_ints(raw: Optional[str]) -> Optional[List[int]]:
    if not raw:
        return None
    try:
        return [int(x) for x in raw.replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"Expected a comma-separated list of integers, got {raw!r}", stage="filter") from None


def _version_callback(value: bool) -> None:
    if value:
        typer.echo(f"{APP_NAME} {__version__}")
        raise typer.Exit()


# --------------------------------------------------------------------------- #
# Global options
# --------------------------------------------------------------------------- #
@app.callback()
def main(
    ctx: typer.Context,
    workers: int = typer.Option(
        default_workers(), "--workers", min=1, help="Upper bound on parallelism for every stage."
    ),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", help="Seed for randomized operations."),
    log_level: str = typer.Option("INFO", "--log-level", help="DEBUG, INFO, WARNING or ERROR."),
    cache: Optional[Path] = typer.Option(
        None,
        "--cache",
        envvar=CACHE_ENV_VAR,
        help="Translation cache file (JSONL); kept in memory when unset.",
    ),
    version: bool = typer.Option(
        False, "--version", callback=_version_callback, is_eager=True, help="Show the version and exit."
    ),
) -> None:
    """
    Entry point for `mtcurate`.

    Logs go to stderr as key=value lines; data goes to stdout or files.
    """
    configure_logging(log_level)
    ctx.obj = RunContext(workers=workers, seed=seed, cache=cache)


# --------------------------------------------------------------------------- #
# Corpus commands
# --------------------------------------------------------------------------- #
@app.command()
def ingest(
    ctx: typer.Context,
    inputs: List[Path] = typer.Option(..., "--in", help="Input file(s); repeat for several."),
    out: Path = typer.Option(..., "--out"),
    format: str = typer.Option("jsonl", "--format", help="line-pair, tsv or jsonl."),
    domain: Optional[str] = typer.Option(None, "--domain", help="Domain for records without one."),
    tier: int = typer.Option(1, "--tier", min=1, max=4),
    out_format: str = typer.Option(
        "jsonl",
        "--out-format",
        help="jsonl, tsv or line-pair. tsv and line-pair turn tabs and line breaks inside sentences into spaces.",
    ),
) -> None:
    """Read corpora in any supported format and write one merged corpus."""

    def _body() -> Any:
        fmt = CorpusFormat.parse(format)
        specs = [IngestSpec(path=p, format=fmt, domain=domain, tier=tier) for p in inputs]
        return run_ingest(_context(ctx), specs, out, out_format)

    _emit(_guarded(_body))


@app.command()
def merge(
    ctx: typer.Context,
    inputs: List[Path] = typer.Option(..., "--in", help="JSONL corpora, merged in order."),
    out: Path = typer.Option(..., "--out"),
) -> None:
    """Concatenate corpora; duplicates are kept."""
    _emit(_guarded(lambda: run_merge(_context(ctx), inputs, out)))


@app.command()
def stats(
    ctx: typer.Context,
    input: Path = typer.Option(..., "--in"),
) -> None:
    """Per-domain and per-tier counts, token counts and length histograms."""
    _emit(_guarded(lambda: run_stats(_context(ctx), input)))


@app.command("sample-test")
def sample_test(
    ctx: typer.Context,
    input: Path = typer.Option(..., "--in"),
    per_domain: List[str] = typer.Option(..., "--per-domain", help="DOMAIN=COUNT[,DOMAIN=COUNT...]"),
    test_out: Path = typer.Option(..., "--test-out"),
    rest_out: Path = typer.Option(..., "--rest-out"),
) -> None:
    """Draw a per-domain test set (uses the global --seed)."""
    _emit(
        _guarded(
            lambda: run_sample(_context(ctx), input, _parse_counts(per_domain), test_out, rest_out)
        )
    )


@app.command()
def bleu(
    ctx: typer.Context,
    hyp: Path = typer.Option(..., "--hyp"),
    ref: Path = typer.Option(..., "--ref"),
    max_n: int = typer.Option(4, "--max-n", min=1),
    lc: bool = typer.Option(False, "--lc/--no-lc", help="Lowercase before scoring."),
    tokenizer: str = typer.Option(Tokenizer.INTL.value, "--tokenizer"),
    smoothing: str = typer.Option(Smoothing.DEFAULT.value, "--smoothing"),
) -> None:
    """Corpus BLEU of line-aligned hypothesis and reference files."""
    _emit(
        _guarded(
            lambda: run_bleu(_context(ctx), hyp, ref, _bleu_config(max_n, lc, tokenizer, smoothing))
        )
    )


# --------------------------------------------------------------------------- #
# Alignment
# --------------------------------------------------------------------------- #
@app.command()
def align(
    ctx: typer.Context,
    pairs: Path = typer.Option(..., "--pairs", help="TSV manifest: en-doc<TAB>vi-doc[<TAB>domain]."),
    out: Path = typer.Option(..., "--out"),
    report: Optional[Path] = typer.Option(None, "--report"),
    backend: str = typer.Option("lexicon", "--backend", help=f"One of {list_backend_names()}."),
    backend_path: Optional[Path] = typer.Option(
        None, "--lexicon", "--backend-path", help="Lexicon TSV or cache JSONL."
    ),
    lexicon_direction: str = typer.Option("en-vi", "--lexicon-direction"),
    strict: bool = typer.Option(True, "--strict/--no-strict", help="Cache backend: misses are errors."),
    endpoint: Optional[str] = typer.Option(None, "--endpoint", help="Remote translation service URL."),
    timeout: float = typer.Option(DEFAULT_REMOTE_TIMEOUT, "--timeout"),
    max_batch: int = typer.Option(DEFAULT_REMOTE_MAX_BATCH, "--max-batch", min=1),
    retries: int = typer.Option(DEFAULT_REMOTE_RETRIES, "--retries", min=0),
    concurrency: int = typer.Option(DEFAULT_REMOTE_CONCURRENCY, "--concurrency", min=1),
    min_pair_score: float = typer.Option(DEFAULT_MIN_PAIR_SCORE, "--min-pair-score", min=0.0),
    band: Optional[int] = typer.Option(None, "--band", min=0),
    domain: Optional[str] = typer.Option(None, "--domain"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Overrides the global --workers."),
) -> None:
    """Align weakly-aligned document pairs and write tier-3 sentence pairs."""
    run_ctx = _context(ctx)
    if workers is not None:
        run_ctx = RunContext(workers=workers, seed=run_ctx.seed, cache=run_ctx.cache)

    def _body() -> Any:
        spec = _backend_spec(
            backend, backend_path, endpoint, lexicon_direction, strict, timeout, max_batch, retries, concurrency
        )
        config = AlignConfig(min_pair_score=min_pair_score, band=band)
        return run_align(run_ctx, pairs, spec, out, report, config, domain)

    summary = _guarded(_body)
    _emit(
        {
            "documents": len(summary["documents"]),
            "failures": summary["failures"],
            "total_matches": summary["total_matches"],
        }
    )
    if summary["failures"]:
        failed = [d["pair_id"] for d in summary["documents"] if d["error"] is not None]
        _fail(
            {
                "error": "AlignmentFailures",
                "stage": "align",
                "message": f"{len(failed)} document pair(s) failed to align",
                "failed": failed,
            }
        )


# --------------------------------------------------------------------------- #
# Scoring and filtering
# --------------------------------------------------------------------------- #
# Options shared by `score` and `filter`.
SCORER_ENDPOINT = typer.Option(None, "--endpoint", help="Remote scoring service or translator URL.")
SCORER_BACKEND = typer.Option(None, "--backend", help="Translator for the roundtrip scorer.")
SCORER_BACKEND_PATH = typer.Option(None, "--lexicon", "--backend-path", help="Lexicon TSV or cache JSONL.")
SCORER_LEXICON_DIRECTION = typer.Option("en-vi", "--lexicon-direction")
SCORER_STRICT = typer.Option(True, "--strict/--no-strict", help="Cache backend: misses are errors.")
SCORER_BATCH = typer.Option(DEFAULT_SCORE_BATCH, "--batch", min=1)
SCORER_TIMEOUT = typer.Option(DEFAULT_REMOTE_TIMEOUT, "--timeout")
SCORER_RETRIES = typer.Option(DEFAULT_REMOTE_RETRIES, "--retries", min=0)


@app.command()
def score(
    ctx: typer.Context,
    input: Path = typer.Option(..., "--in"),
    out: Path = typer.Option(..., "--out"),
    scorer: str = typer.Option(..., "--scorer", help="remote or roundtrip."),
    endpoint: Optional[str] = SCORER_ENDPOINT,
    backend: Optional[str] = SCORER_BACKEND,
    backend_path: Optional[Path] = SCORER_BACKEND_PATH,
    lexicon_direction: str = SCORER_LEXICON_DIRECTION,
    strict: bool = SCORER_STRICT,
    batch: int = SCORER_BATCH,
    timeout: float = SCORER_TIMEOUT,
    retries: int = SCORER_RETRIES,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="SQLite file for resumable scoring."),
) -> None:
    """Attach a quality score to every pair."""

    def _body() -> Any:
        spec = _scorer_spec(
            scorer, endpoint, backend, backend_path, lexicon_direction, strict, batch, timeout, retries
        )
        assert spec is not None
        return run_score(_context(ctx), input, spec, out, checkpoint, batch)

    _emit(_guarded(_body))


@app.command("filter")
def filter_(
    ctx: typer.Context,
    input: Path = typer.Option(..., "--in"),
    out: Path = typer.Option(..., "--out"),
    k: Optional[int] = typer.Option(None, "--k", min=0),
    tune_k: Optional[str] = typer.Option(None, "--tune-k", help="Comma-separated candidate K values."),
    evaluator: Optional[str] = typer.Option(
        None, "--evaluator", help="Command run as CMD <candidate.jsonl>; prints one number."
    ),
    report: Optional[Path] = typer.Option(None, "--report"),
    scorer: Optional[str] = typer.Option(
        None, "--scorer", help="remote or roundtrip; omit to use the scores already in the input."
    ),
    endpoint: Optional[str] = SCORER_ENDPOINT,
    backend: Optional[str] = SCORER_BACKEND,
    backend_path: Optional[Path] = SCORER_BACKEND_PATH,
    lexicon_direction: str = SCORER_LEXICON_DIRECTION,
    strict: bool = SCORER_STRICT,
    batch: int = SCORER_BATCH,
    timeout: float = SCORER_TIMEOUT,
    retries: int = SCORER_RETRIES,
    lower_is_better: bool = typer.Option(
        False, "--lower-is-better", help="Existing scores are losses (ignored with --scorer)."
    ),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint"),
) -> None:
    """Keep the K best-scored pairs, with K fixed or tuned."""

    def _body() -> Any:
        return run_filter(
            _context(ctx),
            input,
            out,
            k=k,
            tune=_parse_ints(tune_k),
            evaluator=evaluator,
            scorer=_scorer_spec(
                scorer, endpoint, backend, backend_path, lexicon_direction, strict, batch, timeout, retries
            ),
            higher_is_better=not lower_is_better,
            report=report,
            checkpoint=checkpoint,
        )

    _emit(_guarded(_body))


@app.command()
def dedup(
    ctx: typer.Context,
    input: Path = typer.Option(..., "--in"),
    out: Path = typer.Option(..., "--out"),
    against: Optional[Path] = typer.Option(None, "--against", help="Drop pairs that also occur here."),
    policy: Optional[str] = typer.Option(
        None, "--policy", help="Comma-separated flags, e.g. 'strip_punct,nocasefold'."
    ),
    report: Optional[Path] = typer.Option(None, "--report"),
    paranoid: bool = typer.Option(False, "--paranoid", help="Compare full keys, not only fingerprints."),
    shards: int = typer.Option(1, "--shards", min=1),
    hash_seed: int = typer.Option(DEFAULT_DEDUP_SEED, "--hash-seed", min=0),
) -> None:
    """Remove duplicate pairs, within a corpus or against another one."""

    def _body() -> Any:
        return run_dedup(
            _context(ctx),
            input,
            out,
            against=against,
            policy=NormalizationPolicy.parse(policy),
            report=report,
            paranoid=paranoid,
            shards=shards,
            dedup_seed=hash_seed,
        )

    _emit(_guarded(_body))


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #
@app.command("eval-matrix")
def eval_matrix(
    ctx: typer.Context,
    manifest: Path = typer.Option(..., "--manifest", help="JSON matrix manifest."),
    out: Optional[Path] = typer.Option(None, "--out", help="Also write the matrix as JSON."),
    max_n: int = typer.Option(4, "--max-n", min=1),
    lc: bool = typer.Option(False, "--lc/--no-lc"),
    tokenizer: str = typer.Option(Tokenizer.INTL.value, "--tokenizer"),
) -> None:
    """Multi-domain BLEU matrix, printed as a table."""
    matrix = _guarded(
        lambda: run_eval_matrix(
            _context(ctx), manifest, _bleu_config(max_n, lc, tokenizer, Smoothing.DEFAULT.value), out
        )
    )
    typer.echo(matrix.render_table(), nl=False)


@app.command()
def budget(
    ctx: typer.Context,
    supervised: Path = typer.Option(..., "--supervised", help="CSV: data_amount,bleu[,wall_hours]"),
    pretraining: Path = typer.Option(..., "--pretraining", help="CSV: data_amount,bleu[,wall_hours]"),
    target: float = typer.Option(..., "--target", help="Target BLEU."),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """Data needed by pretraining vs supervised data to reach a target BLEU."""
    result = _guarded(lambda: run_budget(_context(ctx), supervised, pretraining, target, out))
    typer.echo(result.render_table(), nl=False)


@app.command("time-report")
def time_report_cmd(
    ctx: typer.Context,
    records: Path = typer.Option(..., "--records", help="CSV: tier,human_hours,machine_hours,pairs"),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """Per-tier collection cost summary."""
    result = _guarded(lambda: run_time_report(_context(ctx), records, out))
    typer.echo(result.render_table(), nl=False)


@app.command()
def pipeline(
    ctx: typer.Context,
    config: Path = typer.Option(..., "--config", help="JSON pipeline config."),
) -> None:
    """Run a config-driven sequence of stages."""
    _emit(_guarded(lambda: run_pipeline(PipelineConfig.load(config), _context(ctx))))


# click >= 8.2 reports a bare `mtcurate` as a usage error carrying the help text.
_NO_ARGS_IS_HELP = getattr(click_exceptions, "NoArgsIsHelpError", ())


def run() -> None:
    """Console entry point; usage errors print the same JSON shape as toolkit errors."""
    try:
        code = app(standalone_mode=False)
    except _NO_ARGS_IS_HELP as exc:
        exc.show()
        raise SystemExit(exc.exit_code) from None
    except click_exceptions.ClickException as exc:
        payload = {"error": type(exc).__name__, "stage": "cli", "message": exc.format_message()}
        usage_ctx = getattr(exc, "ctx", None)
        if usage_ctx is not None:
            payload["usage"] = usage_ctx.get_usage()
        typer.echo(json.dumps(payload, ensure_ascii=False), err=True)
        raise SystemExit(exc.exit_code) from None
    except click_exceptions.Abort:
        raise SystemExit(1) from None
    raise SystemExit(code if isinstance(code, int) else 0)


if __name__ == "__main__":  # pragma: no cover
    run()
