"""Type-specific required caption content and heuristic coverage reporting.

The required structural slots and key-insight tasks per chart type ship as
a vendored JSON table. Coverage matching is a transparent, versioned
keyword/regex lexicon: deterministic, offline, and explicitly heuristic.
Coverage never gates scoring; it is advisory reporting only.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .core import CHART_TYPES
from .errors import UnknownChartTypeError

DATA_DIR = Path(__file__).parent / "data"
SCHEMA_TABLES_PATH = DATA_DIR / "schema_tables.json"
LEXICON_PATH = DATA_DIR / "coverage_lexicon.json"

STRUCTURAL_SLOTS = frozenset(
    {
        "title",
        "axes",
        "categories",
        "bubble",
        "legends",
        "labels",
        "base_map",
        "color_scale",
        "geographic_labels",
        "data_classes",
        "north_arrow",
        "tiles",
        "hierarchy_levels",
        "color_coding",
    }
)

INSIGHT_TASKS = frozenset(
    {
        "retrieve_value",
        "find_extremum",
        "make_comparison",
        "determine_range",
        "find_correlations_trend",
        "characterize_distribution",
        "find_clusters",
        "find_anomalies",
    }
)


@dataclass(frozen=True)
class SchemaTable:
    structural: dict[str, frozenset[str]]
    insights: dict[str, frozenset[str]]
    version: str

    def __post_init__(self) -> None:
        for table in (self.structural, self.insights):
            if set(table) != CHART_TYPES:
                raise ValueError("schema table must key exactly the nine chart types")
        for chart_type, slots in self.structural.items():
            unknown = slots - STRUCTURAL_SLOTS
            if unknown:
                raise ValueError(f"{chart_type}: unknown structural slots {sorted(unknown)}")
        for chart_type, tasks in self.insights.items():
            unknown = tasks - INSIGHT_TASKS
            if unknown:
                raise ValueError(f"{chart_type}: unknown insight tasks {sorted(unknown)}")


@lru_cache(maxsize=1)
def load_schema_tables(path: str | Path = SCHEMA_TABLES_PATH) -> SchemaTable:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return SchemaTable(
        structural={k: frozenset(v) for k, v in data["structural"].items()},
        insights={k: frozenset(v) for k, v in data["insights"].items()},
        version=data["version"],
    )


def required_slots(chart_type: str) -> tuple[frozenset[str], frozenset[str]]:
    """The (structural slots, insight tasks) a caption of this type must cover."""
    if chart_type not in CHART_TYPES:
        raise UnknownChartTypeError(f"unknown chart type: {chart_type!r}")
    tables = load_schema_tables()
    return tables.structural[chart_type], tables.insights[chart_type]


@dataclass(frozen=True)
class Lexicon:
    version: str
    patterns: dict[str, tuple[re.Pattern, ...]]


@lru_cache(maxsize=1)
def load_lexicon(path: str | Path = LEXICON_PATH) -> Lexicon:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    patterns = {
        name: tuple(re.compile(p, re.IGNORECASE) for p in pats)
        for name, pats in data["patterns"].items()
    }
    missing = (STRUCTURAL_SLOTS | INSIGHT_TASKS) - set(patterns)
    if missing:
        raise ValueError(f"lexicon missing entries for {sorted(missing)}")
    return Lexicon(version=data["version"], patterns=patterns)


@dataclass(frozen=True)
class EvidenceSpan:
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class CoverageReport:
    chart_type: str
    required: tuple[str, ...]
    matched: dict[str, tuple[EvidenceSpan, ...]]
    coverage_ratio: float
    lexicon_version: str

    def to_dict(self) -> dict:
        return {
            "chart_type": self.chart_type,
            "required": list(self.required),
            "matched": {
                name: [{"start": s.start, "end": s.end, "text": s.text} for s in spans]
                for name, spans in self.matched.items()
            },
            "coverage_ratio": self.coverage_ratio,
            "lexicon_version": self.lexicon_version,
        }


def coverage(caption: str, chart_type: str, lexicon: Lexicon | None = None) -> CoverageReport:
    """Report which required slots/tasks the caption shows lexical evidence for."""
    if chart_type not in CHART_TYPES:
        raise UnknownChartTypeError(f"unknown chart type: {chart_type!r}")
    lexicon = lexicon or load_lexicon()
    structural, insights = required_slots(chart_type)
    required = tuple(sorted(structural)) + tuple(sorted(insights))
    matched: dict[str, tuple[EvidenceSpan, ...]] = {}
    for name in required:
        spans = [
            EvidenceSpan(m.start(), m.end(), m.group(0))
            for pattern in lexicon.patterns[name]
            for m in pattern.finditer(caption)
        ]
        if spans:
            matched[name] = tuple(sorted(spans, key=lambda s: (s.start, s.end)))
    ratio = len(matched) / len(required) if required else 0.0
    return CoverageReport(
        chart_type=chart_type,
        required=required,
        matched=matched,
        coverage_ratio=ratio,
        lexicon_version=lexicon.version,
    )
