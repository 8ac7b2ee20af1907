"""End-to-end evaluation over a manifest: reconstruct, score, aggregate, report.

Per-sample work is cached content-addressed (code, rendered image,
similarity, extracted text), so re-running an identical configuration makes
zero backend or sandbox calls and interrupted runs resume from the cache.
"""

from __future__ import annotations

import csv
import io
import json
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .backends import HttpTextBackend, MockTextBackend, TextBackend
from .cache import ContentCache, cache_key
from .core import Manifest, content_hash, load_manifest
from .errors import ConfigError, InfrastructureError
from .ocr import (
    ExternalOcrEngine,
    OcrEngine,
    OcrRecord,
    PngMetadataEngine,
    ScoreTriple,
    StaticOcrEngine,
    TextSet,
    extract_text,
    ocrscore,
)
from .reconstructor import PromptSet, reconstruct
from .sandbox import RenderSandbox, SandboxLimits
from .schema_audit import coverage
from .similarity import (
    EmbeddingBackend,
    OnnxEncoder,
    ReferenceEncoder,
    SimilarityRecord,
    cosine,
    vcs,
)

CACHE_ENV_VAR = "CHARTCYCLE_CACHE"


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


@dataclass(frozen=True)
class RunConfig:
    manifest: str
    out_dir: str
    text_backend: dict = field(default_factory=lambda: {"kind": "mock"})
    encoders: tuple = (({"kind": "reference"}),)
    ocr_engine: dict = field(default_factory=lambda: {"kind": "png-meta"})
    prompts_dir: str | None = None
    max_attempts: int = 3
    sandbox: dict = field(default_factory=dict)
    exclude_failures: bool = False
    ocr_fuzzy_threshold: int = 0
    ocr_min_confidence: float = 0.0
    schema_coverage: bool = True
    workers: int = 4
    sample_limit: int | None = None
    sample_seed: int = 0
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.encoders:
            raise ConfigError("at least one encoder backend is required")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def canonical_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "text_backend": self.text_backend,
            "encoders": list(self.encoders),
            "ocr_engine": self.ocr_engine,
            "prompts_dir": self.prompts_dir,
            "max_attempts": self.max_attempts,
            "sandbox": self.sandbox,
            "exclude_failures": self.exclude_failures,
            "ocr_fuzzy_threshold": self.ocr_fuzzy_threshold,
            "ocr_min_confidence": self.ocr_min_confidence,
            "schema_coverage": self.schema_coverage,
            "sample_limit": self.sample_limit,
            "sample_seed": self.sample_seed,
        }

    def digest(self) -> str:
        return content_hash(canonical_json(self.canonical_dict())).hex

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "encoders" in data:
            data["encoders"] = tuple(data["encoders"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def to_file(self, path: str | Path) -> None:
        data = self.canonical_dict()
        data["out_dir"] = self.out_dir
        data["workers"] = self.workers
        data["cache_dir"] = self.cache_dir
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def build_text_backend(cfg: dict) -> TextBackend:
    kind = cfg.get("kind", "mock")
    if kind == "http":
        return HttpTextBackend(
            base_url=cfg["base_url"],
            model=cfg.get("model"),
            api_key_env=cfg.get("api_key_env", "CHARTCYCLE_API_KEY"),
            retries=cfg.get("retries", 3),
            max_per_second=cfg.get("max_per_second"),
        )
    if kind == "mock":
        script = cfg.get("script", [])
        if "script_path" in cfg:
            script = json.loads(Path(cfg["script_path"]).read_text(encoding="utf-8"))
        return MockTextBackend(script=list(script), backend_id=cfg.get("backend_id", "mock"))
    if kind == "oracle":
        from .synthetic import OracleCodeBackend

        return OracleCodeBackend()
    if kind == "corrupting":
        from .synthetic import CorruptingCodeBackend

        return CorruptingCodeBackend(corrupt_ids=frozenset(cfg.get("corrupt_ids", [])))
    raise ConfigError(f"unknown text backend kind: {kind!r}")


def build_encoder(cfg: dict) -> EmbeddingBackend:
    kind = cfg.get("kind", "reference")
    if kind == "reference":
        return ReferenceEncoder(resolution=cfg.get("resolution", 64))
    if kind == "onnx":
        return OnnxEncoder(
            model_path=cfg["model_path"],
            resolution=cfg["resolution"],
            dim=cfg["dim"],
            backend_id=cfg.get("backend_id"),
        )
    raise ConfigError(f"unknown encoder kind: {kind!r}")


def build_ocr_engine(cfg: dict) -> OcrEngine:
    kind = cfg.get("kind", "png-meta")
    if kind == "png-meta":
        return PngMetadataEngine()
    if kind == "external":
        return ExternalOcrEngine(command=cfg["command"], engine_id=cfg.get("engine_id"))
    if kind == "static":
        return StaticOcrEngine()
    raise ConfigError(f"unknown OCR engine kind: {kind!r}")


@dataclass(frozen=True)
class SampleResult:
    sample_id: str
    status: str
    attempts: int
    similarity: dict  # backend_id -> float | None
    ocr_t_size: int
    ocr_t_hat_size: int
    ocr_intersection: int
    ocr_fuzzy_intersection: int | None = None
    coverage_ratio: float | None = None
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "status": self.status,
            "attempts": self.attempts,
            "similarity": self.similarity,
            "ocr_t_size": self.ocr_t_size,
            "ocr_t_hat_size": self.ocr_t_hat_size,
            "ocr_intersection": self.ocr_intersection,
            "ocr_fuzzy_intersection": self.ocr_fuzzy_intersection,
            "coverage_ratio": self.coverage_ratio,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SampleResult":
        return cls(**data)


@dataclass(frozen=True)
class CorpusScores:
    n: int
    vcs_by_backend: dict
    ocr: ScoreTriple
    failures: int
    mean_attempts: float
    ocr_fuzzy: ScoreTriple | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "vcs_by_backend": self.vcs_by_backend,
            "ocr": self.ocr.to_dict(),
            "failures": self.failures,
            "mean_attempts": self.mean_attempts,
            "ocr_fuzzy": self.ocr_fuzzy.to_dict() if self.ocr_fuzzy else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusScores":
        return cls(
            n=data["n"],
            vcs_by_backend=data["vcs_by_backend"],
            ocr=ScoreTriple(**data["ocr"]),
            failures=data["failures"],
            mean_attempts=data["mean_attempts"],
            ocr_fuzzy=ScoreTriple(**data["ocr_fuzzy"]) if data.get("ocr_fuzzy") else None,
        )


def compute_corpus_scores(
    results: list[SampleResult],
    encoder_ids: list[str],
    exclude_failures: bool,
    fuzzy: bool,
    ocr_engine_id: str,
) -> CorpusScores:
    """Recompute the aggregates from per-sample records (order-independent)."""
    n = len(results)
    failures = sum(1 for r in results if r.status != "succeeded")
    mean_attempts = sum(r.attempts for r in results) / n if n else 0.0

    vcs_by_backend: dict[str, float] = {}
    for backend_id in encoder_ids:
        records = []
        for result in results:
            value = result.similarity.get(backend_id)
            failed = result.status != "succeeded"
            if failed and exclude_failures:
                continue
            records.append(
                SimilarityRecord(
                    sample_id=result.sample_id,
                    backend_id=backend_id,
                    value=0.0 if failed else value,
                    failed_reconstruction=failed,
                )
            )
        vcs_by_backend[backend_id] = vcs(records) if records else 0.0

    def _ocr_records(use_fuzzy: bool) -> list[OcrRecord]:
        records = []
        for result in results:
            if result.status != "succeeded" and exclude_failures:
                continue
            intersection = (
                result.ocr_fuzzy_intersection if use_fuzzy else result.ocr_intersection
            )
            records.append(
                OcrRecord(
                    sample_id=result.sample_id,
                    t=_opaque_text_set(result.ocr_t_size, ocr_engine_id),
                    t_hat=_opaque_text_set(result.ocr_t_hat_size, ocr_engine_id),
                    intersection_size=intersection,
                )
            )
        return records

    exact_records = _ocr_records(False)
    ocr_triple = ocrscore(exact_records) if exact_records else ScoreTriple(0.0, 0.0, 0.0, 0)
    fuzzy_triple = None
    if fuzzy:
        fuzzy_records = _ocr_records(True)
        fuzzy_triple = ocrscore(fuzzy_records) if fuzzy_records else ScoreTriple(0.0, 0.0, 0.0, 0)
    return CorpusScores(
        n=n,
        vcs_by_backend=vcs_by_backend,
        ocr=ocr_triple,
        failures=failures,
        mean_attempts=mean_attempts,
        ocr_fuzzy=fuzzy_triple,
    )


def _opaque_text_set(size: int, engine_id: str) -> TextSet:
    # Placeholder sets that only carry cardinality; micro-averaging needs
    # nothing else once intersections are recorded.
    return TextSet(
        strings=frozenset(f"s{i}" for i in range(size)), engine_id=engine_id, raw_count=size
    )


@dataclass(frozen=True)
class RunReport:
    config_digest: str
    prompts_version: str
    backend_ids: dict
    failure_policy: dict
    samples: tuple[SampleResult, ...]
    scores: CorpusScores
    started_at: str
    finished_at: str
    sample_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "prompts_version": self.prompts_version,
            "backend_ids": self.backend_ids,
            "failure_policy": self.failure_policy,
            "samples": [s.to_dict() for s in self.samples],
            "scores": self.scores.to_dict(),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "sample_seed": self.sample_seed,
        }

    def canonical_dict(self) -> dict:
        """The report minus timestamps and wall-clock fields."""
        data = self.to_dict()
        data.pop("started_at")
        data.pop("finished_at")
        for sample in data["samples"]:
            sample.pop("wall_time")
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(
            config_digest=data["config_digest"],
            prompts_version=data["prompts_version"],
            backend_ids=data["backend_ids"],
            failure_policy=data["failure_policy"],
            samples=tuple(SampleResult.from_dict(s) for s in data["samples"]),
            scores=CorpusScores.from_dict(data["scores"]),
            started_at=data["started_at"],
            finished_at=data["finished_at"],
            sample_seed=data.get("sample_seed", 0),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def load_report(run_dir: str | Path) -> RunReport:
    return RunReport.from_json((Path(run_dir) / "report.json").read_text(encoding="utf-8"))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _select_samples(manifest: Manifest, limit: int | None, seed: int):
    samples = list(manifest.samples)
    if limit is None or limit >= len(samples):
        return samples
    indexes = sorted(random.Random(seed).sample(range(len(samples)), limit))
    return [samples[i] for i in indexes]


class _Evaluator:
    """One evaluation run; holds shared backends, cache, and counters."""

    def __init__(self, config, manifest, backend, encoders, ocr_engine, sandbox, prompts, cache):
        self.config = config
        self.manifest = manifest
        self.backend = backend
        self.encoders = encoders
        self.ocr_engine = ocr_engine
        self.sandbox = sandbox
        self.prompts = prompts
        self.cache = cache
        self.images_dir = Path(config.out_dir) / "images"
        self.images_dir.mkdir(parents=True, exist_ok=True)

    def _cached_json(self, key: str):
        data = self.cache.get(key)
        return None if data is None else json.loads(data)

    def _reconstruction(self, sample) -> tuple[dict, bytes | None]:
        code_key = cache_key(
            "code",
            sample.caption,
            self.backend.backend_id,
            self.prompts.version,
            str(self.config.max_attempts),
        )
        record = self._cached_json(code_key)
        if record is None:
            recon = reconstruct(
                sample,
                self.backend,
                self.sandbox,
                self.prompts,
                max_attempts=self.config.max_attempts,
                image_dir=self.images_dir,
            )
            record = {
                "status": recon.status,
                "final_code": recon.final_code,
                "attempts": [a.to_dict() for a in recon.attempts],
            }
            self.cache.put(code_key, canonical_json(record))
            image_bytes = None
            if recon.status == "succeeded":
                image_bytes = Path(recon.rendered_image_ref).read_bytes()
                self.cache.put(self._image_key(recon.final_code), image_bytes)
            return record, image_bytes

        if record["status"] != "succeeded":
            return record, None
        image_bytes = self.cache.get(self._image_key(record["final_code"]))
        if image_bytes is None:
            # Sandbox config changed since the code was cached; re-render once.
            outcome = self.sandbox.execute(record["final_code"])
            if outcome.status != "success":
                record = dict(record, status="failed")
                return record, None
            image_bytes = outcome.image_bytes
            self.cache.put(self._image_key(record["final_code"]), image_bytes)
        (self.images_dir / f"{sample.id}.png").write_bytes(image_bytes)
        return record, image_bytes

    def _image_key(self, code: str) -> str:
        return cache_key("image", code, self.sandbox.limits.config_key())

    def _similarity(self, orig_digest: str, orig_bytes: bytes, recon_bytes: bytes, encoder) -> float:
        sim_key = cache_key(
            "sim", orig_digest, content_hash(recon_bytes).hex, encoder.backend_id
        )
        cached = self._cached_json(sim_key)
        if cached is not None:
            return cached["value"]
        value = cosine(encoder.embed(orig_bytes), encoder.embed(recon_bytes))
        self.cache.put(sim_key, canonical_json({"value": value}))
        return value

    def _text_set(self, image_bytes: bytes, digest: str) -> TextSet:
        key = cache_key("ocr", digest, self.ocr_engine.engine_id)
        cached = self._cached_json(key)
        if cached is not None:
            return TextSet(
                strings=frozenset(cached["strings"]),
                engine_id=self.ocr_engine.engine_id,
                raw_count=cached["raw_count"],
            )
        text_set = extract_text(
            image_bytes, self.ocr_engine, min_confidence=self.config.ocr_min_confidence
        )
        self.cache.put(
            key,
            canonical_json(
                {"strings": sorted(text_set.strings), "raw_count": text_set.raw_count}
            ),
        )
        return text_set

    def evaluate_sample(self, sample) -> SampleResult:
        import time

        started = time.monotonic()
        orig_path = self.manifest.resolve_image_path(sample)
        try:
            orig_bytes = orig_path.read_bytes()
        except OSError as exc:
            raise InfrastructureError(f"cannot read original image {orig_path}: {exc}") from exc
        orig_digest = content_hash(orig_bytes).hex

        record, recon_bytes = self._reconstruction(sample)
        succeeded = record["status"] == "succeeded" and recon_bytes is not None

        similarity: dict[str, float | None] = {}
        for encoder in self.encoders:
            if succeeded:
                similarity[encoder.backend_id] = self._similarity(
                    orig_digest, orig_bytes, recon_bytes, encoder
                )
            else:
                similarity[encoder.backend_id] = None

        t = self._text_set(orig_bytes, orig_digest)
        if succeeded:
            t_hat = self._text_set(recon_bytes, content_hash(recon_bytes).hex)
        else:
            t_hat = TextSet(
                strings=frozenset(), engine_id=self.ocr_engine.engine_id, raw_count=0
            )
        exact = OcrRecord.build(sample.id, t, t_hat)
        fuzzy_intersection = None
        if self.config.ocr_fuzzy_threshold > 0:
            fuzzy_intersection = OcrRecord.build(
                sample.id, t, t_hat, fuzzy_threshold=self.config.ocr_fuzzy_threshold
            ).intersection_size

        coverage_ratio = None
        if self.config.schema_coverage and sample.chart_type:
            coverage_ratio = coverage(sample.caption, sample.chart_type).coverage_ratio

        return SampleResult(
            sample_id=sample.id,
            status="succeeded" if succeeded else "failed",
            attempts=len(record["attempts"]),
            similarity=similarity,
            ocr_t_size=len(t),
            ocr_t_hat_size=len(t_hat),
            ocr_intersection=exact.intersection_size,
            ocr_fuzzy_intersection=fuzzy_intersection,
            coverage_ratio=coverage_ratio,
            wall_time=time.monotonic() - started,
        )


def run_eval(
    config: RunConfig,
    *,
    text_backend: TextBackend | None = None,
    encoders: list[EmbeddingBackend] | None = None,
    ocr_engine: OcrEngine | None = None,
    sandbox: RenderSandbox | None = None,
) -> RunReport:
    """Evaluate every sample in the manifest and persist the report.

    Pre-built backends may be injected (tests, scripts); otherwise they are
    constructed from the config. Per-sample code failures never abort the
    run; infrastructure failures do.
    """
    started_at = _now()
    manifest = load_manifest(config.manifest)
    samples = _select_samples(manifest, config.sample_limit, config.sample_seed)

    backend = text_backend or build_text_backend(config.text_backend)
    encoders = encoders or [build_encoder(c) for c in config.encoders]
    ocr_engine = ocr_engine or build_ocr_engine(config.ocr_engine)
    sandbox = sandbox or RenderSandbox(SandboxLimits(**config.sandbox))
    prompts = PromptSet.load(config.prompts_dir) if config.prompts_dir else PromptSet.load()

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_root = os.environ.get(CACHE_ENV_VAR) or config.cache_dir or out_dir / "cache"
    cache = ContentCache(cache_root)

    evaluator = _Evaluator(
        config, manifest, backend, encoders, ocr_engine, sandbox, prompts, cache
    )
    if config.workers == 1:
        results = [evaluator.evaluate_sample(s) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(evaluator.evaluate_sample, samples))

    scores = compute_corpus_scores(
        results,
        [e.backend_id for e in encoders],
        config.exclude_failures,
        config.ocr_fuzzy_threshold > 0,
        ocr_engine.engine_id,
    )
    report = RunReport(
        config_digest=config.digest(),
        prompts_version=prompts.version,
        backend_ids={
            "text": backend.backend_id,
            "encoders": [e.backend_id for e in encoders],
            "ocr": ocr_engine.engine_id,
        },
        failure_policy={
            "exclude_failures": config.exclude_failures,
            "ocr_fuzzy_threshold": config.ocr_fuzzy_threshold,
        },
        samples=tuple(results),
        scores=scores,
        started_at=started_at,
        finished_at=_now(),
        sample_seed=config.sample_seed,
    )
    _verify_aggregates(report, config, ocr_engine.engine_id)
    write_report(report, out_dir)
    config.to_file(out_dir / "config.json")
    return report


def _verify_aggregates(report: RunReport, config: RunConfig, ocr_engine_id: str) -> None:
    recomputed = compute_corpus_scores(
        list(report.samples),
        list(report.scores.vcs_by_backend),
        config.exclude_failures,
        config.ocr_fuzzy_threshold > 0,
        ocr_engine_id,
    )
    if recomputed != report.scores:
        raise InfrastructureError(
            "aggregate/record mismatch: stored scores do not match recomputation"
        )


def write_report(report: RunReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "report.canonical.json").write_bytes(canonical_json(report.canonical_dict()))


def export_report(report: RunReport, fmt: str, path: str | Path) -> Path:
    """Write the report as canonical JSON or a flat CSV with aggregate footers."""
    path = Path(path)
    if fmt == "json":
        path.write_text(report.to_json(), encoding="utf-8")
        return path
    if fmt != "csv":
        raise ConfigError(f"unknown export format: {fmt!r}")

    encoder_ids = list(report.scores.vcs_by_backend)
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    header = [
        "row_kind",
        "sample_id",
        "status",
        "attempts",
        "wall_time",
        "ocr_t_size",
        "ocr_t_hat_size",
        "ocr_intersection",
        "coverage_ratio",
    ] + [f"sim:{b}" for b in encoder_ids] + ["value"]
    writer.writerow(header)
    for s in report.samples:
        writer.writerow(
            [
                "sample",
                s.sample_id,
                s.status,
                s.attempts,
                s.wall_time,
                s.ocr_t_size,
                s.ocr_t_hat_size,
                s.ocr_intersection,
                "" if s.coverage_ratio is None else s.coverage_ratio,
            ]
            + ["" if s.similarity.get(b) is None else s.similarity[b] for b in encoder_ids]
            + [""]
        )

    def footer(name: str, value) -> None:
        writer.writerow(["aggregate", name] + [""] * (len(header) - 3) + [value])

    footer("n", report.scores.n)
    footer("failures", report.scores.failures)
    footer("mean_attempts", report.scores.mean_attempts)
    footer("ocr_precision", report.scores.ocr.precision)
    footer("ocr_recall", report.scores.ocr.recall)
    footer("ocr_f1", report.scores.ocr.f1)
    for backend_id in encoder_ids:
        footer(f"vcs:{backend_id}", report.scores.vcs_by_backend[backend_id])
    path.write_text(buffer.getvalue(), encoding="utf-8")
    return path


def rescore(run_dir: str | Path, encoder_cfgs: list[dict]) -> RunReport:
    """Re-score the cached reconstructions of a finished run with new encoders."""
    run_dir = Path(run_dir)
    report = load_report(run_dir)
    config = RunConfig.from_file(run_dir / "config.json")
    manifest = load_manifest(config.manifest)
    by_id = {s.id: s for s in manifest.samples}
    encoders = [build_encoder(c) for c in encoder_cfgs]
    cache_root = os.environ.get(CACHE_ENV_VAR) or config.cache_dir or run_dir / "cache"
    cache = ContentCache(cache_root)

    new_samples = []
    for result in report.samples:
        similarity = dict(result.similarity)
        for encoder in encoders:
            if result.status != "succeeded":
                similarity[encoder.backend_id] = None
                continue
            sample = by_id[result.sample_id]
            orig_bytes = manifest.resolve_image_path(sample).read_bytes()
            recon_bytes = (run_dir / "images" / f"{result.sample_id}.png").read_bytes()
            sim_key = cache_key(
                "sim",
                content_hash(orig_bytes).hex,
                content_hash(recon_bytes).hex,
                encoder.backend_id,
            )
            cached = cache.get(sim_key)
            if cached is not None:
                value = json.loads(cached)["value"]
            else:
                value = cosine(encoder.embed(orig_bytes), encoder.embed(recon_bytes))
                cache.put(sim_key, canonical_json({"value": value}))
            similarity[encoder.backend_id] = value
        new_samples.append(replace(result, similarity=similarity))

    encoder_ids = sorted({b for s in new_samples for b in s.similarity})
    scores = compute_corpus_scores(
        new_samples,
        encoder_ids,
        config.exclude_failures,
        config.ocr_fuzzy_threshold > 0,
        report.backend_ids["ocr"],
    )
    updated = replace(
        report,
        samples=tuple(new_samples),
        scores=scores,
        backend_ids=dict(report.backend_ids, encoders=encoder_ids),
        finished_at=_now(),
    )
    write_report(updated, run_dir)
    return updated
