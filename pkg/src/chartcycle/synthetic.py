"""Seeded synthetic chart corpora with machine-parseable captions.

The captions follow a strict grammar that the oracle backend can parse back
into plotting code, so a perfect caption round-trips to a byte-identical
chart. The corrupting backend swaps the chart type for selected samples to
emulate captions that misdescribe the chart.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from pathlib import Path

from .backends import GenerationRequest, TextBackend
from .core import ChartSample, dump_manifest
from .errors import GenerationError
from .sandbox import RenderSandbox, SandboxLimits

KINDS = ("bar", "line", "pie")
_NAMES = ("Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf", "Hotel")

CORRUPT_KIND = {"bar": "pie", "line": "pie", "pie": "bar"}


@dataclass(frozen=True)
class SyntheticChart:
    sample_id: str
    kind: str
    title: str
    categories: tuple[str, ...]
    values: tuple[int, ...]
    x_label: str = "Category"
    y_label: str = "Value"


def make_charts(n: int, seed: int = 0, kinds=KINDS) -> list[SyntheticChart]:
    rng = random.Random(seed)
    charts = []
    for i in range(n):
        kind = kinds[i % len(kinds)]
        size = rng.randint(3, min(6, len(_NAMES)))
        categories = tuple(rng.sample(_NAMES, size))
        values = tuple(rng.randint(1, 50) for _ in range(size))
        charts.append(
            SyntheticChart(
                sample_id=f"syn-{i:03d}",
                kind=kind,
                title=f"Study {i:03d}",
                categories=categories,
                values=values,
            )
        )
    return charts


def chart_caption(chart: SyntheticChart) -> str:
    caption = (
        f"A {chart.kind} chart titled '{chart.title}'. "
        f"Categories: {', '.join(chart.categories)}. "
        f"Values: {', '.join(str(v) for v in chart.values)}."
    )
    if chart.kind != "pie":
        caption += (
            f" The x-axis is labeled '{chart.x_label}'"
            f" and the y-axis is labeled '{chart.y_label}'."
        )
    return caption


_CAPTION_RE = re.compile(
    r"A (?P<kind>bar|line|pie) chart titled '(?P<title>[^']+)'\. "
    r"Categories: (?P<categories>[^.]+)\. "
    r"Values: (?P<values>[^.]+)\."
    r"(?: The x-axis is labeled '(?P<x>[^']+)' and the y-axis is labeled '(?P<y>[^']+)'\.)?"
)


def parse_caption(caption: str) -> SyntheticChart:
    match = _CAPTION_RE.search(caption)
    if match is None:
        raise GenerationError(f"caption does not follow the synthetic grammar: {caption!r}")
    return SyntheticChart(
        sample_id="",
        kind=match["kind"],
        title=match["title"],
        categories=tuple(c.strip() for c in match["categories"].split(",")),
        values=tuple(int(v.strip()) for v in match["values"].split(",")),
        x_label=match["x"] or "Category",
        y_label=match["y"] or "Value",
    )


def chart_code(chart: SyntheticChart, kind: str | None = None) -> str:
    """Deterministic plotting source for a synthetic chart."""
    kind = kind or chart.kind
    lines = [
        "import matplotlib.pyplot as plt",
        "",
        f"categories = {list(chart.categories)!r}",
        f"values = {list(chart.values)!r}",
        "fig, ax = plt.subplots(figsize=(6.4, 4.8))",
    ]
    if kind == "bar":
        lines.append("ax.bar(categories, values)")
    elif kind == "line":
        lines.append("ax.plot(categories, values, marker='o')")
    elif kind == "pie":
        lines.append("ax.pie(values, labels=categories)")
    else:
        raise ValueError(f"unknown synthetic chart kind: {kind!r}")
    lines.append(f"ax.set_title({chart.title!r})")
    if kind != "pie":
        lines.append(f"ax.set_xlabel({chart.x_label!r})")
        lines.append(f"ax.set_ylabel({chart.y_label!r})")
    lines.append("plt.show()")
    return "\n".join(lines) + "\n"


_DESCRIPTION_RE = re.compile(r'\[Description\]\n"(?P<caption>.*)"\n\nRespond', re.DOTALL)


def caption_from_prompt(prompt: str) -> str:
    match = _DESCRIPTION_RE.search(prompt)
    if match is None:
        raise GenerationError("prompt does not contain a caption block")
    return match["caption"]


class OracleCodeBackend(TextBackend):
    """Emits exactly the code that reproduces a synthetic caption's chart."""

    backend_id = "oracle"

    def complete(self, request: GenerationRequest) -> str:
        self._count()
        caption = caption_from_prompt(request.prompt)
        return chart_code(parse_caption(caption))


class CorruptingCodeBackend(TextBackend):
    """Oracle variant that renders the wrong chart type for selected titles."""

    def __init__(self, corrupt_titles=frozenset()):
        self.corrupt_titles = frozenset(corrupt_titles)
        self.backend_id = "oracle-corrupting"

    def complete(self, request: GenerationRequest) -> str:
        self._count()
        chart = parse_caption(caption_from_prompt(request.prompt))
        kind = CORRUPT_KIND[chart.kind] if chart.title in self.corrupt_titles else None
        return chart_code(chart, kind=kind)


def build_corpus(
    out_dir: str | Path,
    charts: list[SyntheticChart],
    limits: SandboxLimits | None = None,
) -> Path:
    """Render original images for the charts and write a manifest.

    Originals go through the same render sandbox as reconstructions, so a
    perfect caption round-trip yields byte-identical images.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    sandbox = RenderSandbox(limits or SandboxLimits())
    samples = []
    for chart in charts:
        outcome = sandbox.execute(chart_code(chart))
        if outcome.status != "success":
            raise RuntimeError(
                f"synthetic chart {chart.sample_id} failed to render: {outcome.stderr_tail}"
            )
        image_path = images_dir / f"{chart.sample_id}.png"
        image_path.write_bytes(outcome.image_bytes)
        samples.append(
            ChartSample(
                id=chart.sample_id,
                image_ref=f"images/{chart.sample_id}.png",
                caption=chart_caption(chart),
                chart_type=chart.kind,
            )
        )
    return dump_manifest(samples, out_dir / "manifest.jsonl")
