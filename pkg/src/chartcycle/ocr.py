"""OCR text extraction and the micro-averaged corpus text-fidelity score.

Precision pools intersection counts over reconstructed-text set sizes,
recall over original-text set sizes; the final score is their F1. Matching
is exact on normalized strings (set semantics); an optional edit-distance
threshold is reported separately when enabled.
"""

from __future__ import annotations

import io
import json
import subprocess
import tempfile
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BackendUnavailableError, DecodeError, UndefinedAggregateError
from .sandbox import PNG_TEXT_KEY


def normalize(strings) -> set[str]:
    """NFKC, lowercase, trim, collapse whitespace runs; drop empties; dedup."""
    out = set()
    for s in strings:
        s = unicodedata.normalize("NFKC", s).lower()
        s = " ".join(s.split())
        if s:
            out.add(s)
    return out


@dataclass(frozen=True)
class TextSet:
    """Normalized, deduplicated strings extracted from one image."""

    strings: frozenset[str]
    engine_id: str
    raw_count: int

    def __post_init__(self) -> None:
        renormalized = normalize(self.strings)
        if renormalized != set(self.strings):
            raise ValueError("TextSet members must already be normalized")

    def __len__(self) -> int:
        return len(self.strings)


EMPTY_TEXT_SET = TextSet(strings=frozenset(), engine_id="none", raw_count=0)


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def match_count(t: frozenset[str], t_hat: frozenset[str], fuzzy_threshold: int = 0) -> int:
    """|t ∩ t_hat| under exact matching, or greedy matching within the threshold."""
    if fuzzy_threshold <= 0:
        return len(t & t_hat)
    matched = len(t & t_hat)
    remaining_t = sorted(t - t_hat)
    for s in sorted(t_hat - t):
        for candidate in remaining_t:
            if edit_distance(s, candidate) <= fuzzy_threshold:
                remaining_t.remove(candidate)
                matched += 1
                break
    return matched


@dataclass(frozen=True)
class OcrRecord:
    """Per-sample text sets from the original and reconstructed charts."""

    sample_id: str
    t: TextSet
    t_hat: TextSet
    intersection_size: int

    def __post_init__(self) -> None:
        if self.intersection_size > min(len(self.t), len(self.t_hat)):
            raise ValueError("intersection cannot exceed either set size")

    @classmethod
    def build(
        cls, sample_id: str, t: TextSet, t_hat: TextSet, fuzzy_threshold: int = 0
    ) -> "OcrRecord":
        return cls(
            sample_id=sample_id,
            t=t,
            t_hat=t_hat,
            intersection_size=match_count(t.strings, t_hat.strings, fuzzy_threshold),
        )


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f1: float
    n: int

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "n": self.n}

    @classmethod
    def from_counts(cls, intersection: int, predicted: int, reference: int, n: int) -> "ScoreTriple":
        # Zero denominators score 0: pessimistic, total, and continuous.
        precision = intersection / predicted if predicted else 0.0
        recall = intersection / reference if reference else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision=precision, recall=recall, f1=f1, n=n)


def ocrscore(records) -> ScoreTriple:
    """Micro-averaged precision/recall/F1 pooled over all records."""
    records = list(records)
    if not records:
        raise UndefinedAggregateError("text-fidelity aggregate over an empty record list")
    intersection = sum(r.intersection_size for r in records)
    predicted = sum(len(r.t_hat) for r in records)
    reference = sum(len(r.t) for r in records)
    return ScoreTriple.from_counts(intersection, predicted, reference, len(records))


@dataclass(frozen=True)
class OcrRegion:
    text: str
    confidence: float = 1.0
    bbox: tuple[float, float, float, float] | None = None


class OcrEngine:
    """Interface: recognize(image) -> list of {text, confidence, bbox} regions."""

    engine_id: str = "abstract"

    def recognize(self, image) -> list[OcrRegion]:
        raise NotImplementedError


@dataclass
class StaticOcrEngine(OcrEngine):
    """Deterministic mock: a fixed region list, or a mapping keyed by path name."""

    regions: list[OcrRegion] = field(default_factory=list)
    by_name: dict[str, list[OcrRegion]] = field(default_factory=dict)
    engine_id: str = "static-mock"

    def recognize(self, image) -> list[OcrRegion]:
        if self.by_name and isinstance(image, (str, Path)):
            return self.by_name.get(Path(image).name, [])
        return list(self.regions)


class PngMetadataEngine(OcrEngine):
    """Reads the figure-text list the render sandbox embeds into PNGs.

    Deterministic and model-free; only meaningful for charts rendered by
    this toolkit (or any producer writing the same metadata key).
    """

    engine_id = "png-meta"

    def recognize(self, image) -> list[OcrRegion]:
        from PIL import Image as PILImage

        try:
            if isinstance(image, (bytes, bytearray)):
                img = PILImage.open(io.BytesIO(image))
            else:
                img = PILImage.open(Path(image))
        except Exception as exc:
            raise DecodeError(f"cannot decode image: {exc}") from exc
        payload = getattr(img, "text", {}).get(PNG_TEXT_KEY)
        if payload is None:
            return []
        return [OcrRegion(text=t) for t in json.loads(payload)]


class ExternalOcrEngine(OcrEngine):
    """Adapter for an external OCR executable.

    Contract: ``command <image-path>`` prints a JSON list of
    ``{"text": ..., "confidence": ..., "bbox": ...}`` objects on stdout.
    """

    def __init__(self, command: list[str], engine_id: str | None = None, timeout: float = 120.0):
        if not command:
            raise BackendUnavailableError("external OCR command must be non-empty")
        self.command = list(command)
        self.timeout = timeout
        self.engine_id = engine_id or f"ext:{Path(command[0]).name}"

    def recognize(self, image) -> list[OcrRegion]:
        if isinstance(image, (bytes, bytearray)):
            with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as handle:
                handle.write(image)
                path = handle.name
        else:
            path = str(image)
        try:
            result = subprocess.run(
                self.command + [path],
                capture_output=True,
                timeout=self.timeout,
                check=True,
            )
        except (OSError, subprocess.SubprocessError) as exc:
            raise BackendUnavailableError(f"external OCR engine failed: {exc}") from exc
        regions = json.loads(result.stdout.decode("utf-8"))
        return [
            OcrRegion(
                text=r["text"],
                confidence=float(r.get("confidence", 1.0)),
                bbox=tuple(r["bbox"]) if r.get("bbox") else None,
            )
            for r in regions
        ]


def extract_text(image, engine: OcrEngine, min_confidence: float = 0.0) -> TextSet:
    """Run the engine and normalize its regions into a TextSet."""
    regions = engine.recognize(image)
    kept = [r.text for r in regions if r.confidence >= min_confidence]
    return TextSet(
        strings=frozenset(normalize(kept)),
        engine_id=engine.engine_id,
        raw_count=len(regions),
    )
