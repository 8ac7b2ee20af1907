"""Canonical data types, manifest ingestion, and content hashing.

A manifest is UTF-8 line-delimited JSON, one sample per line, with fields
``id``, ``image``, ``caption`` and optional ``chart_type``, ``source``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestParseError, ManifestValidationError

CHART_TYPES = frozenset(
    {
        "line",
        "bar",
        "pie",
        "histogram",
        "scatter",
        "area",
        "bubble",
        "choropleth_map",
        "treemap",
    }
)

_HEX64 = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class Digest:
    """A SHA-256 digest rendered as lowercase hex."""

    hex: str
    algorithm: str = "sha-256"

    def __post_init__(self) -> None:
        if self.algorithm != "sha-256":
            raise ValueError(f"unsupported digest algorithm: {self.algorithm!r}")
        if not _HEX64.match(self.hex):
            raise ValueError(f"not a 64-char lowercase hex digest: {self.hex!r}")

    def __str__(self) -> str:
        return self.hex


def content_hash(data: bytes) -> Digest:
    """Deterministic SHA-256 digest of a byte sequence."""
    return Digest(hashlib.sha256(data).hexdigest())


@dataclass(frozen=True)
class ChartSample:
    """One (chart image, caption) pair under evaluation."""

    id: str
    image_ref: str
    caption: str
    chart_type: str | None = None
    source_tag: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestValidationError("sample id must be non-empty")
        if not self.caption:
            raise ManifestValidationError(f"sample {self.id!r}: caption must be non-empty")
        if self.chart_type is not None and self.chart_type not in CHART_TYPES:
            raise ManifestValidationError(
                f"sample {self.id!r}: unknown chart_type {self.chart_type!r}"
            )

    def to_json_line(self) -> str:
        record = {"id": self.id, "image": self.image_ref, "caption": self.caption}
        if self.chart_type is not None:
            record["chart_type"] = self.chart_type
        if self.source_tag is not None:
            record["source"] = self.source_tag
        return json.dumps(record, ensure_ascii=False)


@dataclass(frozen=True)
class Manifest:
    """An ordered collection of samples plus the raw-file digest."""

    samples: tuple[ChartSample, ...]
    source_path: str
    digest: Digest

    def __len__(self) -> int:
        return len(self.samples)

    def resolve_image_path(self, sample: ChartSample) -> Path:
        """Resolve a sample's image reference against the manifest location."""
        return resolve_image_ref(sample.image_ref, base=Path(self.source_path).parent)


def resolve_image_ref(ref: str, base: Path | None = None) -> Path:
    """Turn a local path or file:// URI into a filesystem path."""
    if ref.startswith("file://"):
        ref = ref[len("file://") :]
    path = Path(ref)
    if not path.is_absolute() and base is not None:
        path = base / path
    return path


_REQUIRED_FIELDS = ("id", "image", "caption")


def _sample_from_record(record: dict, line_no: int) -> ChartSample:
    for field in _REQUIRED_FIELDS:
        if field not in record:
            raise ManifestValidationError(f"line {line_no}: missing required field {field!r}")
    sample_id = record["id"]
    caption = record["caption"]
    if not isinstance(sample_id, str) or not sample_id:
        raise ManifestValidationError(f"line {line_no}: field 'id' must be a non-empty string")
    if not isinstance(caption, str) or not caption:
        raise ManifestValidationError(f"line {line_no}: field 'caption' must be a non-empty string")
    chart_type = record.get("chart_type")
    if chart_type is not None and chart_type not in CHART_TYPES:
        raise ManifestValidationError(f"line {line_no}: unknown chart_type {chart_type!r}")
    return ChartSample(
        id=sample_id,
        image_ref=record["image"],
        caption=caption,
        chart_type=chart_type,
        source_tag=record.get("source"),
    )


def load_manifest(path: str | Path, strict: bool = False) -> Manifest:
    """Load a line-JSON manifest, preserving file order.

    With ``strict`` True every image reference must resolve to an existing
    file. Raises ManifestParseError / ManifestValidationError with the
    offending line number.
    """
    path = Path(path)
    raw = path.read_bytes()
    samples: list[ChartSample] = []
    seen: dict[str, int] = {}
    # Split on newline only: json.dumps leaves U+0085/U+2028/U+2029 unescaped,
    # so splitlines() would break framing for captions containing them.
    for line_no, line in enumerate(raw.decode("utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"line {line_no}: malformed JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise ManifestParseError(f"line {line_no}: expected a JSON object")
        sample = _sample_from_record(record, line_no)
        if sample.id in seen:
            raise ManifestValidationError(
                f"duplicate id {sample.id!r} on lines {seen[sample.id]} and {line_no}"
            )
        seen[sample.id] = line_no
        if strict:
            image_path = resolve_image_ref(sample.image_ref, base=path.parent)
            if not image_path.is_file():
                raise ManifestValidationError(f"line {line_no}: image not found: {image_path}")
        samples.append(sample)
    return Manifest(samples=tuple(samples), source_path=str(path), digest=content_hash(raw))


def dump_manifest(samples, path: str | Path) -> Path:
    """Write samples as line-JSON; returns the written path."""
    path = Path(path)
    text = "".join(s.to_json_line() + "\n" for s in samples)
    path.write_text(text, encoding="utf-8")
    return path
