"""
Config-driven pipelines: an ordered list of stages run with shared settings.

A config is JSON:

    {
      "workers": 4, "seed": 13, "log_level": "INFO", "cache": "cache.jsonl",
      "stages": [
        {"stage": "ingest", "inputs": [{"path": "raw.tsv", "format": "tsv"}], "out": "all.jsonl"},
        {"stage": "dedup", "in": "all.jsonl", "out": "dedup.jsonl"},
        {"stage": "filter", "in": "dedup.jsonl", "k": 1000, "out": "top.jsonl"}
      ]
    }

Relative paths resolve against the config file's directory. Everything is
validated before the first stage runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from .aligner import AlignConfig
from .bleu import BleuConfig
from .corpus import CorpusFormat, line_pair_paths
from .dedup import NormalizationPolicy
from .errors import ConfigError, MtcurateError
from .logs import configure_logging, stage_logger
from .quality import ScorerSpec
from .stages import (
    RunContext,
    ingest_specs,
    run_align,
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
    write_json,
)
from .translators import BackendSpec, list_backend_names


log = stage_logger("pipeline")

GLOBAL_KEYS = frozenset({"workers", "seed", "log_level", "cache", "stages"})


def _bleu(cfg: Mapping[str, Any]) -> Optional[BleuConfig]:
    data = cfg.get("bleu")
    if data is None:
        return None
    try:
        return BleuConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid bleu settings: {exc}") from None


def _policy(raw: Any) -> Optional[NormalizationPolicy]:
    if raw is None:
        return None
    if isinstance(raw, str):
        return NormalizationPolicy.parse(raw)
    try:
        return NormalizationPolicy(**raw)
    except TypeError as exc:
        raise ConfigError(f"Invalid dedup policy: {exc}") from None


# --------------------------------------------------------------------------- #
# Stage adapters: config dict -> stage runner
# --------------------------------------------------------------------------- #
def _ingest(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_ingest(ctx, ingest_specs(cfg["inputs"]), cfg["out"], cfg.get("format", "jsonl"))


def _merge(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_merge(ctx, cfg["inputs"], cfg["out"])


def _stats(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    summary = run_stats(ctx, cfg["in"], _bleu(cfg))
    if cfg.get("out"):
        write_json(cfg["out"], summary)
    return summary


def _sample(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_sample(ctx, cfg["in"], cfg["per_domain"], cfg["test_out"], cfg["rest_out"])


def _align_config(cfg: Mapping[str, Any]) -> AlignConfig:
    options: Dict[str, Any] = {}
    if (bleu := _bleu(cfg)) is not None:
        options["bleu"] = bleu
    try:
        if "min_pair_score" in cfg:
            options["min_pair_score"] = float(cfg["min_pair_score"])
        if cfg.get("band") is not None:
            options["band"] = int(cfg["band"])
    except (TypeError, ValueError):
        raise ConfigError(
            f"align: min_pair_score and band must be numbers, got "
            f"{cfg.get('min_pair_score')!r} / {cfg.get('band')!r}",
            stage="align",
        ) from None
    return AlignConfig(**options)


def _align(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_align(
        ctx,
        cfg["pairs"],
        BackendSpec.from_dict(cfg["backend"]),
        cfg["out"],
        report=cfg.get("report"),
        config=_align_config(cfg),
        domain=cfg.get("domain"),
    )


def _score(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_score(
        ctx,
        cfg["in"],
        ScorerSpec.from_dict(cfg["scorer"]),
        cfg["out"],
        checkpoint=cfg.get("checkpoint"),
        batch_size=cfg.get("batch_size"),
    )


def _filter(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    scorer = ScorerSpec.from_dict(cfg["scorer"]) if cfg.get("scorer") else None
    return run_filter(
        ctx,
        cfg["in"],
        cfg["out"],
        k=cfg.get("k"),
        tune=cfg.get("tune_k"),
        evaluator=cfg.get("evaluator"),
        scorer=scorer,
        higher_is_better=bool(cfg.get("higher_is_better", True)),
        report=cfg.get("report"),
        checkpoint=cfg.get("checkpoint"),
    )


def _dedup(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_dedup(
        ctx,
        cfg["in"],
        cfg["out"],
        against=cfg.get("against"),
        policy=_policy(cfg.get("policy")),
        report=cfg.get("report"),
        paranoid=bool(cfg.get("paranoid", False)),
        shards=int(cfg.get("shards", 1)),
        dedup_seed=int(cfg.get("seed", 0)),
    )


def _check_sample(cfg: Mapping[str, Any]) -> None:
    counts = cfg["per_domain"]
    if not isinstance(counts, dict) or not all(
        isinstance(n, int) and not isinstance(n, bool) and n >= 0 for n in counts.values()
    ):
        raise ConfigError(
            f"sample: per_domain must map domains to non-negative integers, got {counts!r}",
            stage="sample",
        )


def _check_align(cfg: Mapping[str, Any]) -> None:
    _align_config(cfg)
    kind = BackendSpec.from_dict(cfg["backend"]).kind
    if kind not in list_backend_names():
        raise ConfigError(f"align: unknown translator backend {kind!r}", stage="align")


def _check_scored(cfg: Mapping[str, Any]) -> None:
    if cfg.get("scorer") is not None:
        ScorerSpec.from_dict(cfg["scorer"])


def _check_dedup(cfg: Mapping[str, Any]) -> None:
    _policy(cfg.get("policy"))
    for key in ("shards", "seed"):
        if key in cfg and (not isinstance(cfg[key], int) or isinstance(cfg[key], bool)):
            raise ConfigError(f"dedup: {key} must be an integer, got {cfg[key]!r}", stage="dedup")


def _check_budget(cfg: Mapping[str, Any]) -> None:
    try:
        float(cfg["target"])
    except (TypeError, ValueError):
        raise ConfigError(f"budget: target must be a number, got {cfg['target']!r}", stage="budget") from None


def _eval(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_eval_matrix(ctx, cfg["manifest"], _bleu(cfg), cfg.get("out")).to_dict()


def _budget(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_budget(
        ctx, cfg["supervised"], cfg["pretraining"], float(cfg["target"]), cfg.get("out")
    ).to_dict()


def _time_report(ctx: RunContext, cfg: Dict[str, Any]) -> Any:
    return run_time_report(ctx, cfg["records"], cfg.get("out")).to_dict()


@dataclass(frozen=True)
class StageSchema:
    run: Callable[[RunContext, Dict[str, Any]], Any]
    required: FrozenSet[str]
    optional: FrozenSet[str] = frozenset()
    # Keys holding input paths (a path or a list of paths) / output paths.
    inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    # Option checks that need no input files; run during validation.
    check: Optional[Callable[[Mapping[str, Any]], None]] = None

    @property
    def keys(self) -> FrozenSet[str]:
        return self.required | self.optional | {"stage"}


STAGES: Dict[str, StageSchema] = {
    "ingest": StageSchema(
        _ingest,
        frozenset({"inputs", "out"}),
        frozenset({"format"}),
        (),
        ("out",),
        check=lambda cfg: ingest_specs(cfg["inputs"]),
    ),
    "merge": StageSchema(_merge, frozenset({"inputs", "out"}), frozenset(), ("inputs",), ("out",)),
    "stats": StageSchema(_stats, frozenset({"in"}), frozenset({"out", "bleu"}), ("in",), ("out",)),
    "sample": StageSchema(
        _sample,
        frozenset({"in", "per_domain", "test_out", "rest_out"}),
        frozenset(),
        ("in",),
        ("test_out", "rest_out"),
        check=_check_sample,
    ),
    "align": StageSchema(
        _align,
        frozenset({"pairs", "backend", "out"}),
        frozenset({"report", "min_pair_score", "band", "domain", "bleu"}),
        ("pairs",),
        ("out", "report"),
        check=_check_align,
    ),
    "score": StageSchema(
        _score,
        frozenset({"in", "scorer", "out"}),
        frozenset({"checkpoint", "batch_size"}),
        ("in",),
        ("out",),
        check=_check_scored,
    ),
    "filter": StageSchema(
        _filter,
        frozenset({"in", "out"}),
        frozenset({"k", "tune_k", "evaluator", "scorer", "higher_is_better", "report", "checkpoint"}),
        ("in",),
        ("out", "report"),
        check=_check_scored,
    ),
    "dedup": StageSchema(
        _dedup,
        frozenset({"in", "out"}),
        frozenset({"against", "policy", "report", "paranoid", "shards", "seed"}),
        ("in", "against"),
        ("out", "report"),
        check=_check_dedup,
    ),
    "eval": StageSchema(_eval, frozenset({"manifest"}), frozenset({"out", "bleu"}), ("manifest",), ("out",)),
    "budget": StageSchema(
        _budget,
        frozenset({"supervised", "pretraining", "target"}),
        frozenset({"out"}),
        ("supervised", "pretraining"),
        ("out",),
        check=_check_budget,
    ),
    "time_report": StageSchema(
        _time_report, frozenset({"records"}), frozenset({"out"}), ("records",), ("out",)
    ),
}

# Keys (per stage) whose values are file paths to resolve against the config dir.
_PATH_KEYS = {"in", "out", "inputs", "pairs", "report", "checkpoint", "against", "manifest",
              "supervised", "pretraining", "records", "test_out", "rest_out"}


def _resolve(value: Any, base: Path) -> Any:
    if isinstance(value, list):
        return [_resolve(v, base) for v in value]
    if isinstance(value, dict):
        if "path" in value:
            return {**value, "path": str(_resolve(value["path"], base))}
        return value
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def _backend_paths(cfg: Dict[str, Any], base: Path) -> Dict[str, Any]:
    """Resolve the `path` of nested backend specs (align backend, roundtrip scorer)."""
    cfg = dict(cfg)
    if isinstance(cfg.get("backend"), dict):
        cfg["backend"] = _resolve(cfg["backend"], base)
    if isinstance(cfg.get("scorer"), dict) and isinstance(cfg["scorer"].get("backend"), dict):
        cfg["scorer"] = {**cfg["scorer"], "backend": _resolve(cfg["scorer"]["backend"], base)}
    return cfg


@dataclass
class PipelineConfig:
    stages: List[Dict[str, Any]]
    workers: Optional[int] = None
    seed: Optional[int] = None
    log_level: Optional[str] = None
    cache: Optional[str] = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: "str | Path | None" = None) -> "PipelineConfig":
        unknown = set(data) - GLOBAL_KEYS
        if unknown:
            raise ConfigError(f"Unknown pipeline key(s): {sorted(unknown)}")
        if not isinstance(data.get("stages"), list) or not data["stages"]:
            raise ConfigError("Pipeline config needs a non-empty 'stages' list")
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        cache = data.get("cache")
        return cls(
            stages=[dict(s) for s in data["stages"]],
            workers=data.get("workers"),
            seed=int(data["seed"]) if data.get("seed") is not None else None,
            log_level=str(data["log_level"]) if data.get("log_level") else None,
            cache=str(_resolve(cache, base)) if cache else None,
            base_dir=base,
        )

    @classmethod
    def load(cls, path: "str | Path") -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Pipeline config not found: {path}", path=str(path))
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}", path=str(path)) from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data, base_dir=path.parent)

    def resolved_stages(self) -> List[Dict[str, Any]]:
        out = []
        for cfg in self.stages:
            cfg = {
                key: _resolve(value, self.base_dir) if key in _PATH_KEYS and value is not None else value
                for key, value in cfg.items()
            }
            out.append(_backend_paths(cfg, self.base_dir))
        return out

    def validate(self) -> List[Dict[str, Any]]:
        """Check stage names, keys and input paths; returns the resolved stages."""
        stages = self.resolved_stages()
        produced: Set[Path] = set()
        for index, cfg in enumerate(stages):
            name = cfg.get("stage")
            where = f"stage {index} ({name})"
            schema = STAGES.get(name)  # type: ignore[arg-type]
            if schema is None:
                raise ConfigError(f"{where}: unknown stage (expected one of {sorted(STAGES)})", index=index)
            missing = schema.required - set(cfg)
            if missing:
                raise ConfigError(f"{where}: missing key(s) {sorted(missing)}", index=index)
            unknown = set(cfg) - schema.keys
            if unknown:
                raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}", index=index)
            if schema.check is not None:
                try:
                    schema.check(cfg)
                except MtcurateError as exc:
                    exc.details.setdefault("index", index)
                    raise
            for path in _input_paths(name, schema, cfg):
                if not path.exists() and path.resolve() not in produced:
                    raise ConfigError(
                        f"{where}: input {path} does not exist and no earlier stage writes it",
                        index=index,
                        path=str(path),
                    )
            for key in schema.outputs:
                if cfg.get(key):
                    produced.add(Path(cfg[key]).resolve())
            if name == "ingest" and CorpusFormat.parse(cfg.get("format", "jsonl")) is CorpusFormat.LINE_PAIR:
                produced.update(p.resolve() for p in line_pair_paths(cfg["out"]))
        return stages

    def context(self, fallback: Optional[RunContext] = None) -> RunContext:
        fallback = fallback or RunContext()
        return RunContext(
            workers=self.workers if self.workers is not None else fallback.workers,
            seed=self.seed if self.seed is not None else fallback.seed,
            cache=Path(self.cache) if self.cache else fallback.cache,
        )


def _input_paths(name: str, schema: StageSchema, cfg: Mapping[str, Any]) -> List[Path]:
    paths: List[Path] = []
    if name == "ingest":
        for item in cfg["inputs"]:
            if not isinstance(item, dict) or "path" not in item:
                raise ConfigError(f"ingest input {item!r} needs a 'path'")
            if CorpusFormat.parse(item.get("format", "jsonl")) is CorpusFormat.LINE_PAIR:
                paths.extend(line_pair_paths(item["path"]))
            else:
                paths.append(Path(item["path"]))
        return paths
    for key in schema.inputs:
        value = cfg.get(key)
        if value is None:
            continue
        paths.extend(Path(v) for v in (value if isinstance(value, list) else [value]))
    return paths


def run_pipeline(config: PipelineConfig, fallback: Optional[RunContext] = None) -> List[Dict[str, Any]]:
    """Validate, then run every stage in order; returns one summary per stage."""
    stages = config.validate()
    ctx = config.context(fallback)
    if config.log_level:
        configure_logging(config.log_level)
    summaries: List[Dict[str, Any]] = []
    for index, cfg in enumerate(stages):
        name = cfg["stage"]
        log.info(f"[{index + 1}/{len(stages)}] {name}")
        try:
            result = STAGES[name].run(ctx, cfg)
        except MtcurateError as exc:
            exc.details.setdefault("pipeline_stage", name)
            exc.details.setdefault("pipeline_index", index)
            raise
        summaries.append({"stage": name, "result": result})
    return summaries
