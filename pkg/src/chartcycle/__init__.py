"""Reference-free chart caption evaluation and verification toolkit."""

from .core import ChartSample, Digest, Manifest, content_hash, load_manifest
from .ocr import OcrRecord, ScoreTriple, TextSet, extract_text, normalize, ocrscore
from .reconstructor import PromptSet, Reconstruction, reconstruct
from .sandbox import RenderSandbox, SandboxLimits
from .similarity import ReferenceEncoder, SimilarityRecord, cosine, vcs

__all__ = [
    "ChartSample",
    "Digest",
    "Manifest",
    "content_hash",
    "load_manifest",
    "OcrRecord",
    "ScoreTriple",
    "TextSet",
    "extract_text",
    "normalize",
    "ocrscore",
    "PromptSet",
    "Reconstruction",
    "reconstruct",
    "RenderSandbox",
    "SandboxLimits",
    "ReferenceEncoder",
    "SimilarityRecord",
    "cosine",
    "vcs",
]

__version__ = "0.1.0"
