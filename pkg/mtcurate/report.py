"""
Evaluation reports: multi-domain BLEU matrices, data-budget ratios between
two learning curves, and per-tier collection cost summaries.

Translation systems are external; the matrix is computed from hypothesis
files the caller already produced.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .bleu import BleuConfig, corpus_bleu
from .corpus import DomainTag, read_lines
from .errors import BudgetError, MissingFileError, ShapeMismatchError
from .logs import stage_logger
from .translators import Direction


log = stage_logger("eval")
budget_log = stage_logger("budget")

Column = Tuple[Direction, DomainTag]


def _render(headers: Sequence[str], rows: Sequence[Sequence[str]], left: int = 1) -> str:
    """Plain-text table; the first `left` columns are left-aligned, the rest right-aligned."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def _line(cells: Sequence[str]) -> str:
        out = [
            c.ljust(widths[i]) if i < left else c.rjust(widths[i])
            for i, c in enumerate(cells)
        ]
        return "  ".join(out).rstrip()

    lines = [_line(headers), "  ".join("-" * w for w in widths)]
    lines.extend(_line(r) for r in rows)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- #
# Multi-domain BLEU matrix
# --------------------------------------------------------------------------- #
def parse_column(raw: "str | Column | Sequence[str]") -> Column:
    """Accepts ``("en->vi", "law")`` or ``"en->vi/law"``."""
    if isinstance(raw, str):
        direction, sep, domain = raw.rpartition("/")
        if not sep:
            raise ShapeMismatchError(f"Column {raw!r} is not of the form <direction>/<domain>")
        raw = (direction, domain)
    direction, domain = raw
    if not isinstance(direction, Direction):
        direction = Direction.parse(direction)
    return direction, DomainTag.parse(domain)


def column_key(column: Column) -> str:
    return f"{column[0]}/{column[1]}"


def column_title(column: Column) -> str:
    direction, domain = column
    return f"{direction.src.capitalize()}-{direction.dst.capitalize()} {domain.value.capitalize()}"


@dataclass(frozen=True)
class Cell:
    value: float
    # What the table shows; precomputed inputs keep their own precision.
    text: str


@dataclass
class EvalMatrix:
    rows: List[str]
    columns: List[Column]
    cells: Dict[Tuple[str, Column], Cell]

    def __post_init__(self) -> None:
        for row in self.rows:
            for col in self.columns:
                cell = self.cells.get((row, col))
                if cell is None:
                    raise ShapeMismatchError(
                        f"Matrix is not rectangular: no cell for row {row!r}, column {column_key(col)}",
                        row=row,
                        column=column_key(col),
                    )
                if not 0.0 <= cell.value <= 100.0:
                    raise ShapeMismatchError(
                        f"BLEU {cell.value} outside [0, 100] at row {row!r}, column {column_key(col)}",
                        row=row,
                        column=column_key(col),
                    )
        extra = set(self.cells) - {(r, c) for r in self.rows for c in self.columns}
        if extra:
            row, col = sorted(extra, key=lambda rc: (rc[0], column_key(rc[1])))[0]
            raise ShapeMismatchError(
                f"Cell for row {row!r}, column {column_key(col)} is outside the matrix",
                row=row,
                column=column_key(col),
            )

    @classmethod
    def from_cells(
        cls,
        values: Mapping[str, Mapping[Any, "float | str"]],
        columns: Optional[Sequence[Any]] = None,
    ) -> "EvalMatrix":
        """
        Build a matrix from precomputed values, e.g. published numbers.

        A value given as a string ("14.035") is rendered exactly as given;
        a float is rendered with ``str(value)``.
        """
        rows = list(values)
        cells: Dict[Tuple[str, Column], Cell] = {}
        seen: List[Column] = []
        for row, row_values in values.items():
            for raw_col, raw_value in row_values.items():
                col = parse_column(raw_col)
                if col not in seen:
                    seen.append(col)
                text = raw_value.strip() if isinstance(raw_value, str) else str(raw_value)
                try:
                    value = float(text)
                except ValueError:
                    raise ShapeMismatchError(
                        f"Cell {row!r}/{column_key(col)} is not a number: {raw_value!r}",
                        row=row,
                        column=column_key(col),
                    ) from None
                cells[(row, col)] = Cell(value, text)
        ordered = [parse_column(c) for c in columns] if columns is not None else seen
        return cls(rows=rows, columns=ordered, cells=cells)

    def value(self, row: str, column: "Column | str") -> float:
        return self.cells[(row, parse_column(column))].value

    def render_table(self) -> str:
        headers = ["System"] + [column_title(c) for c in self.columns]
        body = [[row] + [self.cells[(row, c)].text for c in self.columns] for row in self.rows]
        return _render(headers, body)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": list(self.rows),
            "columns": [{"direction": str(d), "domain": t.value} for d, t in self.columns],
            "cells": {
                row: {column_key(c): self.cells[(row, c)].value for c in self.columns}
                for row in self.rows
            },
        }


def _read_segments(path: Path, row: str, column: Column, role: str) -> List[str]:
    if not path.is_file():
        raise MissingFileError(
            f"{role} file for row {row!r}, column {column_key(column)} not found: {path}",
            stage="eval",
            path=str(path),
            row=row,
            column=column_key(column),
        )
    return read_lines(path)


def evaluate_matrix(
    systems: Mapping[str, Mapping[Column, "str | Path"]],
    refs: Mapping[Column, "str | Path"],
    bleu_config: BleuConfig | None = None,
    workers: int = 1,
) -> EvalMatrix:
    """
    Corpus BLEU for every (system, column) hypothesis file against the
    column's reference. Each cell only depends on its own two files.
    """
    bleu_config = bleu_config or BleuConfig()
    columns: List[Column] = [c for c in refs]
    for label, files in systems.items():
        for col in files:
            if col not in refs:
                raise MissingFileError(
                    f"No reference file for column {column_key(col)} (row {label!r})",
                    stage="eval",
                    row=label,
                    column=column_key(col),
                )
    used = {col for files in systems.values() for col in files}
    columns = [c for c in columns if c in used]

    tasks: List[Tuple[str, Column]] = []
    for label, files in systems.items():
        for col in columns:
            if col not in files:
                raise ShapeMismatchError(
                    f"Row {label!r} has no hypothesis file for column {column_key(col)}",
                    row=label,
                    column=column_key(col),
                )
            tasks.append((label, col))

    def _cell(task: Tuple[str, Column]) -> Cell:
        label, col = task
        hyps = _read_segments(Path(systems[label][col]), label, col, "hypothesis")
        ref_lines = _read_segments(Path(refs[col]), label, col, "reference")
        if len(hyps) != len(ref_lines):
            raise ShapeMismatchError(
                f"Row {label!r}, column {column_key(col)}: {len(hyps)} hypothesis lines vs "
                f"{len(ref_lines)} reference lines",
                row=label,
                column=column_key(col),
                hyp_lines=len(hyps),
                ref_lines=len(ref_lines),
            )
        score = corpus_bleu(hyps, ref_lines, bleu_config).score
        log.info(f"{label} / {column_key(col)}: {score:.2f}")
        return Cell(score, f"{score:.2f}")

    if workers <= 1:
        computed = [_cell(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            computed = list(pool.map(_cell, tasks))
    return EvalMatrix(rows=list(systems), columns=columns, cells=dict(zip(tasks, computed)))


def _column_files(data: Mapping[str, Any], base: Path) -> Dict[Column, Path]:
    files: Dict[Column, Path] = {}
    for direction, by_domain in data.items():
        for domain, path in by_domain.items():
            resolved = Path(path)
            if not resolved.is_absolute():
                resolved = base / resolved
            files[parse_column((direction, domain))] = resolved
    return files


def load_matrix_manifest(path: "str | Path") -> Dict[str, Any]:
    """
    Read a matrix manifest. Two shapes are accepted:

        {"systems": {label: {direction: {domain: hyp_path}}},
         "refs":    {direction: {domain: ref_path}}}
        {"cells":   {label: {direction: {domain: value}}}}

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Matrix manifest not found: {path}", stage="eval", path=str(path))
    data = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    if "cells" in data:
        values = {
            label: {
                (direction, domain): value
                for direction, by_domain in by_dir.items()
                for domain, value in by_domain.items()
            }
            for label, by_dir in data["cells"].items()
        }
        return {"cells": values}
    if "systems" not in data or "refs" not in data:
        raise ShapeMismatchError(f"{path}: manifest needs 'systems' and 'refs', or 'cells'")
    return {
        "systems": {label: _column_files(by_dir, base) for label, by_dir in data["systems"].items()},
        "refs": _column_files(data["refs"], base),
    }


# --------------------------------------------------------------------------- #
# Data-budget curves
# --------------------------------------------------------------------------- #
class CurveLabel(str, Enum):
    PRETRAINING = "pretraining"
    SUPERVISED = "supervised"


class RatioKind(str, Enum):
    EXACT = "exact"
    LOWER_BOUND = "lower_bound"
    UPPER_BOUND = "upper_bound"


@dataclass(frozen=True)
class CurvePoint:
    data_amount: float
    bleu: float
    wall_hours: Optional[float] = None


@dataclass(frozen=True)
class BudgetCurve:
    points: Tuple[CurvePoint, ...]
    label: CurveLabel

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "label", CurveLabel(self.label))
        if len(self.points) < 2:
            raise BudgetError(f"{self.label.value} curve needs at least 2 points, got {len(self.points)}")
        prev = 0.0
        for p in self.points:
            if not (math.isfinite(p.data_amount) and math.isfinite(p.bleu)):
                raise BudgetError(f"{self.label.value} curve has a non-finite point {p}")
            if p.data_amount <= prev:
                raise BudgetError(
                    f"{self.label.value} curve: data amounts must be positive and strictly increasing "
                    f"({p.data_amount} after {prev})"
                )
            if p.wall_hours is not None and p.wall_hours < 0:
                raise BudgetError(f"{self.label.value} curve: negative wall_hours at {p.data_amount}")
            prev = p.data_amount

    @property
    def has_wall_hours(self) -> bool:
        return all(p.wall_hours is not None for p in self.points)

    def scaled(self, factor: float) -> "BudgetCurve":
        return BudgetCurve(
            tuple(CurvePoint(p.data_amount * factor, p.bleu, p.wall_hours) for p in self.points),
            self.label,
        )


@dataclass(frozen=True)
class Crossing:
    data_amount: float
    wall_hours: Optional[float]
    reachable: bool
    # Target lies below the curve's first point, so the crossing is at or before it.
    before_start: bool = False


def _log_interp(lo: float, hi: float, t: float) -> float:
    if t <= 0.0:
        return lo
    if t >= 1.0:
        return hi
    if lo > 0 and hi > 0:
        return math.exp(math.log(lo) + t * (math.log(hi) - math.log(lo)))
    return lo + t * (hi - lo)


def crossing(curve: BudgetCurve, target_bleu: float) -> Crossing:
    """
    First point where the piecewise-linear (log data, BLEU) curve reaches
    `target_bleu`. A curve that never gets there reports its largest amount
    with reachable=False.
    """
    pts = curve.points
    first = pts[0]
    if first.bleu >= target_bleu:
        return Crossing(first.data_amount, first.wall_hours, True, before_start=first.bleu > target_bleu)
    for lo, hi in zip(pts, pts[1:]):
        if hi.bleu >= target_bleu > lo.bleu:
            t = (target_bleu - lo.bleu) / (hi.bleu - lo.bleu)
            wall = None
            if lo.wall_hours is not None and hi.wall_hours is not None:
                wall = _log_interp(lo.wall_hours, hi.wall_hours, t)
            return Crossing(_log_interp(lo.data_amount, hi.data_amount, t), wall, True)
    last = pts[-1]
    return Crossing(last.data_amount, last.wall_hours, False)


@dataclass
class BudgetResult:
    target_bleu: float
    supervised: Crossing
    pretraining: Crossing
    data_ratio: float
    ratio_kind: RatioKind
    wall_ratio: Optional[float] = None

    @property
    def reachable(self) -> Dict[str, bool]:
        return {
            CurveLabel.SUPERVISED.value: self.supervised.reachable,
            CurveLabel.PRETRAINING.value: self.pretraining.reachable,
        }

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "target_bleu": self.target_bleu,
            "data_ratio": self.data_ratio,
            "ratio_kind": self.ratio_kind.value,
            "reachable": self.reachable,
            "supervised_amount": self.supervised.data_amount,
            "pretraining_amount": self.pretraining.data_amount,
        }
        if self.wall_ratio is not None:
            data["wall_ratio"] = self.wall_ratio
        return data

    def render_table(self) -> str:
        rows = [
            [
                label,
                f"{c.data_amount:g}",
                "yes" if c.reachable else "no",
                "" if c.wall_hours is None else f"{c.wall_hours:g}",
            ]
            for label, c in (("supervised", self.supervised), ("pretraining", self.pretraining))
        ]
        table = _render(["Curve", "Data amount", "Reachable", "Wall hours"], rows)
        summary = f"target BLEU {self.target_bleu:g}: data ratio {self.data_ratio:g} ({self.ratio_kind.value})"
        if self.wall_ratio is not None:
            summary += f", wall-time ratio {self.wall_ratio:g}"
        return table + summary + "\n"


def _ratio_kind(supervised: Crossing, pretraining: Crossing) -> RatioKind:
    # pretraining amount sits in the numerator, supervised in the denominator
    if not pretraining.reachable or supervised.before_start:
        return RatioKind.LOWER_BOUND
    if not supervised.reachable or pretraining.before_start:
        return RatioKind.UPPER_BOUND
    return RatioKind.EXACT


def budget_ratio(
    supervised: BudgetCurve, pretraining: BudgetCurve, target_bleu: float
) -> BudgetResult:
    """How many times more pretraining data than supervised data reaches `target_bleu`."""
    sup = crossing(supervised, target_bleu)
    pre = crossing(pretraining, target_bleu)
    if sup.before_start and pre.before_start:
        raise BudgetError(
            f"target BLEU {target_bleu} lies below the first point of both curves",
            target_bleu=target_bleu,
        )
    if not sup.reachable and not pre.reachable:
        raise BudgetError(
            f"target BLEU {target_bleu} is above both curves", target_bleu=target_bleu
        )
    wall_ratio = None
    if supervised.has_wall_hours and pretraining.has_wall_hours and sup.wall_hours:
        wall_ratio = pre.wall_hours / sup.wall_hours  # type: ignore[operator]

    result = BudgetResult(
        target_bleu=target_bleu,
        supervised=sup,
        pretraining=pre,
        data_ratio=pre.data_amount / sup.data_amount,
        ratio_kind=_ratio_kind(sup, pre),
        wall_ratio=wall_ratio,
    )
    budget_log.info(
        f"target={target_bleu}: supervised={sup.data_amount:g} pretraining={pre.data_amount:g} "
        f"ratio={result.data_ratio:g} ({result.ratio_kind.value})"
    )
    return result


def _float(raw: Any, path: Path, lineno: int, column: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise BudgetError(
            f"{path}:{lineno}: column {column!r} is not a number: {raw!r}",
            path=str(path),
            line_number=lineno,
        ) from None


def load_curve(path: "str | Path", label: "CurveLabel | str") -> BudgetCurve:
    """CSV with columns data_amount, bleu and optionally wall_hours."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Curve file not found: {path}", stage="budget", path=str(path))
    points: List[CurvePoint] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"data_amount", "bleu"} - set(reader.fieldnames or ())
        if missing:
            raise BudgetError(f"{path}: missing column(s) {sorted(missing)}", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            wall_raw = (row.get("wall_hours") or "").strip()
            points.append(
                CurvePoint(
                    data_amount=_float(row["data_amount"], path, lineno, "data_amount"),
                    bleu=_float(row["bleu"], path, lineno, "bleu"),
                    wall_hours=_float(wall_raw, path, lineno, "wall_hours") if wall_raw else None,
                )
            )
    return BudgetCurve(tuple(points), CurveLabel(label))


# --------------------------------------------------------------------------- #
# Per-tier time report
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class TierRecord:
    tier: int
    human_hours: float
    machine_hours: float
    pairs: int


@dataclass
class TierSummary:
    tier: int
    human_hours: float = 0.0
    machine_hours: float = 0.0
    pairs: int = 0
    records: int = 0

    @property
    def total_hours(self) -> float:
        return self.human_hours + self.machine_hours

    @property
    def pairs_per_hour(self) -> Optional[float]:
        return self.pairs / self.total_hours if self.total_hours > 0 else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tier": self.tier,
            "human_hours": self.human_hours,
            "machine_hours": self.machine_hours,
            "pairs": self.pairs,
            "records": self.records,
            "pairs_per_hour": self.pairs_per_hour,
        }


@dataclass
class TimeReport:
    tiers: List[TierSummary] = field(default_factory=list)

    @property
    def total(self) -> TierSummary:
        total = TierSummary(tier=0)
        for t in self.tiers:
            total.human_hours += t.human_hours
            total.machine_hours += t.machine_hours
            total.pairs += t.pairs
            total.records += t.records
        return total

    def to_dict(self) -> Dict[str, Any]:
        total = self.total.to_dict()
        total.pop("tier")
        return {"tiers": [t.to_dict() for t in self.tiers], "total": total}

    def render_table(self) -> str:
        def _row(label: str, s: TierSummary) -> List[str]:
            rate = s.pairs_per_hour
            return [
                label,
                f"{s.human_hours:g}",
                f"{s.machine_hours:g}",
                str(s.pairs),
                "" if rate is None else f"{rate:.2f}",
            ]

        rows = [_row(str(t.tier), t) for t in self.tiers]
        if self.tiers:
            rows.append(_row("total", self.total))
        return _render(["Tier", "Human h", "Machine h", "Pairs", "Pairs/h"], rows)


def time_report(records: Iterable[TierRecord]) -> TimeReport:
    """Sum hours and pairs per tier, tiers in ascending order."""
    by_tier: Dict[int, TierSummary] = defaultdict(lambda: TierSummary(tier=0))
    for r in records:
        s = by_tier[r.tier]
        s.tier = r.tier
        s.human_hours += r.human_hours
        s.machine_hours += r.machine_hours
        s.pairs += r.pairs
        s.records += 1
    return TimeReport([by_tier[t] for t in sorted(by_tier)])


def load_time_records(path: "str | Path") -> List[TierRecord]:
    """CSV with columns tier, human_hours, machine_hours, pairs."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Time records not found: {path}", stage="eval", path=str(path))
    records: List[TierRecord] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"tier", "human_hours", "machine_hours", "pairs"} - set(reader.fieldnames or ())
        if missing:
            raise ShapeMismatchError(f"{path}: missing column(s) {sorted(missing)}", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(
                    TierRecord(
                        tier=int(row["tier"]),
                        human_hours=float(row["human_hours"]),
                        machine_hours=float(row["machine_hours"]),
                        pairs=int(row["pairs"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ShapeMismatchError(
                    f"{path}:{lineno}: {exc}", path=str(path), line_number=lineno
                ) from None
    return records
