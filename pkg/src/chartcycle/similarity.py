"""Image embedding backends, pairwise cosine similarity, and the corpus score.

The corpus-level visual consistency score is the arithmetic mean of the
per-sample cosine similarities between each original chart and its
reconstruction. Failed reconstructions contribute similarity 0 and stay in
the denominator unless ``exclude_failures`` is set.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import (
    BackendUnavailableError,
    ContractError,
    DecodeError,
    UndefinedAggregateError,
)

REFERENCE_BACKEND_ID = "ref-64"
REFERENCE_RESOLUTION = 64


def load_image(image) -> PILImage.Image:
    """Decode bytes / path / PIL image into a PIL image; raise DecodeError."""
    if isinstance(image, PILImage.Image):
        img = image
    else:
        try:
            if isinstance(image, (bytes, bytearray)):
                img = PILImage.open(io.BytesIO(image))
            else:
                img = PILImage.open(Path(image))
            img.load()
        except Exception as exc:
            raise DecodeError(f"cannot decode image: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise DecodeError("image has zero area")
    return img


@dataclass(frozen=True, eq=False)
class Embedding:
    """A unit-length embedding vector tagged with its producing backend."""

    vector: np.ndarray
    backend_id: str

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding is not unit length (norm={norm})")


class EmbeddingBackend:
    """Pluggable vision encoder; subclasses implement ``_encode``."""

    backend_id: str
    expected_resolution: int
    dim: int

    def embed(self, image) -> Embedding:
        img = load_image(image)
        vector = self._encode(img)
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            # Constant-image convention: the canonical unit basis vector.
            vector = np.zeros(self.dim, dtype=np.float64)
            vector[0] = 1.0
        else:
            vector = vector / norm
        return Embedding(vector=vector, backend_id=self.backend_id)

    def _encode(self, img: PILImage.Image) -> np.ndarray:
        raise NotImplementedError


class ReferenceEncoder(EmbeddingBackend):
    """Deterministic offline encoder: grayscale, 64x64 resize, mean-centered.

    Mean centering makes the encoder invariant to global brightness shifts
    and maps an intensity-inverted image onto the exact negation of the
    original vector.
    """

    def __init__(self, resolution: int = REFERENCE_RESOLUTION):
        self.expected_resolution = resolution
        self.dim = resolution * resolution
        self.backend_id = (
            REFERENCE_BACKEND_ID if resolution == REFERENCE_RESOLUTION else f"ref-{resolution}"
        )

    def _encode(self, img: PILImage.Image) -> np.ndarray:
        # Float grayscale before resizing keeps the pipeline linear in the
        # pixel values (no uint8 rounding), which the inversion identity needs.
        gray = img.convert("F")
        size = (self.expected_resolution, self.expected_resolution)
        resized = gray.resize(size, PILImage.Resampling.BILINEAR)
        values = np.asarray(resized, dtype=np.float64).ravel()
        return values - values.mean()


class OnnxEncoder(EmbeddingBackend):
    """Neural encoder loaded from a local ONNX file.

    Input: RGB resized to ``resolution``, scaled to [-1, 1], NCHW float32.
    Output: the first output tensor, mean-pooled over any token axis.
    """

    def __init__(self, model_path: str | Path, resolution: int, dim: int, backend_id: str | None = None):
        model_path = Path(model_path)
        if not model_path.is_file():
            raise BackendUnavailableError(f"encoder model file not found: {model_path}")
        try:
            import onnxruntime
        except ImportError as exc:
            raise BackendUnavailableError(
                "onnxruntime is required for ONNX encoder backends"
            ) from exc
        from .core import content_hash

        digest = content_hash(model_path.read_bytes()).hex[:12]
        self.backend_id = backend_id or f"onnx:{digest}"
        self.expected_resolution = resolution
        self.dim = dim
        self._session = onnxruntime.InferenceSession(
            str(model_path), providers=["CPUExecutionProvider"]
        )
        self._input_name = self._session.get_inputs()[0].name

    def _encode(self, img: PILImage.Image) -> np.ndarray:
        size = (self.expected_resolution, self.expected_resolution)
        rgb = img.convert("RGB").resize(size, PILImage.Resampling.BILINEAR)
        arr = np.asarray(rgb, dtype=np.float32) / 127.5 - 1.0
        batch = arr.transpose(2, 0, 1)[None, ...]
        (output,) = self._session.run(None, {self._input_name: batch})
        vector = np.asarray(output, dtype=np.float64).squeeze()
        if vector.ndim > 1:
            vector = vector.mean(axis=tuple(range(vector.ndim - 1)))
        if vector.shape != (self.dim,):
            raise ContractError(f"encoder emitted shape {vector.shape}, expected ({self.dim},)")
        return vector


def cosine(a: Embedding, b: Embedding) -> float:
    """Dot product of two unit embeddings from the same backend."""
    if a.backend_id != b.backend_id:
        raise ContractError(f"backend mismatch: {a.backend_id!r} vs {b.backend_id!r}")
    if a.vector.shape != b.vector.shape:
        raise ContractError("embedding dimension mismatch")
    return float(np.dot(a.vector, b.vector))


@dataclass(frozen=True)
class SimilarityRecord:
    sample_id: str
    backend_id: str
    value: float
    failed_reconstruction: bool = False

    def __post_init__(self) -> None:
        if not -1.0 - 1e-9 <= self.value <= 1.0 + 1e-9:
            raise ValueError(f"similarity out of range: {self.value}")
        if self.failed_reconstruction and self.value != 0.0:
            raise ValueError("failed reconstructions must score 0 under the default policy")


def vcs(records: list[SimilarityRecord] | tuple[SimilarityRecord, ...]) -> float:
    """Mean similarity across all samples for a single backend."""
    if not records:
        raise UndefinedAggregateError("similarity aggregate over an empty record list")
    backend_ids = {r.backend_id for r in records}
    if len(backend_ids) != 1:
        raise ContractError(f"records span multiple backends: {sorted(backend_ids)}")
    return sum(r.value for r in records) / len(records)
