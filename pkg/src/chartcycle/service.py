"""Human verification workflow: review queue, leases, verdicts, durability.

All state mutations append to a line-JSON event log and are serialized
through one lock; booting replays the log (plus an optional snapshot), so a
crash loses nothing. Items whose reconstruction failed are auto-rejected as
code errors and never reach a human reviewer by default.
"""

from __future__ import annotations

import json
import statistics
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .core import ChartSample, content_hash, load_manifest
from .errors import ConflictError, ContractError, DataError, InfrastructureError
from .ocr import ScoreTriple

SCENARIOS = ("A_incorrect_caption", "B_insufficient_detail", "C_code_error", "D_pass")
STATUSES = ("pending", "leased", "accepted", "rejected", "render_failed")
SYSTEM_REVIEWER = "system:auto"
DEFAULT_LEASE_TTL = 300.0


@dataclass(frozen=True)
class Verdict:
    decision: str  # accept | reject
    scenario: str
    reviewer_id: str
    decision_seconds: float
    timestamp: float

    def __post_init__(self) -> None:
        if self.decision not in ("accept", "reject"):
            raise ContractError(f"unknown decision {self.decision!r}")
        if self.scenario not in SCENARIOS:
            raise ContractError(f"unknown scenario {self.scenario!r}")
        if (self.decision == "accept") != (self.scenario == "D_pass"):
            raise ContractError("accept pairs with D_pass; rejects pair with A/B/C")

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "scenario": self.scenario,
            "reviewer_id": self.reviewer_id,
            "decision_seconds": self.decision_seconds,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class Lease:
    reviewer_id: str
    granted_at: float
    expires_at: float

    def to_dict(self) -> dict:
        return {
            "reviewer_id": self.reviewer_id,
            "granted_at": self.granted_at,
            "expires_at": self.expires_at,
        }


@dataclass
class ReviewItem:
    item_id: str
    sample_id: str
    caption: str
    original_image: str  # image-store digest
    reconstructed_image: str | None
    status: str
    seq: int
    chart_type: str | None = None
    source_tag: str | None = None
    lease: Lease | None = None
    verdict: Verdict | None = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "sample_id": self.sample_id,
            "caption": self.caption,
            "original_image": self.original_image,
            "reconstructed_image": self.reconstructed_image,
            "status": self.status,
            "seq": self.seq,
            "chart_type": self.chart_type,
            "source_tag": self.source_tag,
            "lease": self.lease.to_dict() if self.lease else None,
            "verdict": self.verdict.to_dict() if self.verdict else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewItem":
        return cls(
            item_id=data["item_id"],
            sample_id=data["sample_id"],
            caption=data["caption"],
            original_image=data["original_image"],
            reconstructed_image=data["reconstructed_image"],
            status=data["status"],
            seq=data["seq"],
            chart_type=data.get("chart_type"),
            source_tag=data.get("source_tag"),
            lease=Lease(**data["lease"]) if data.get("lease") else None,
            verdict=Verdict(**data["verdict"]) if data.get("verdict") else None,
        )


@dataclass(frozen=True)
class GoldLabel:
    sample_id: str
    caption_correct: bool


def load_gold(path: str | Path) -> list[GoldLabel]:
    labels = []
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record["sample_id"] in seen:
            raise DataError(f"duplicate gold label for sample {record['sample_id']!r}")
        seen.add(record["sample_id"])
        labels.append(
            GoldLabel(sample_id=record["sample_id"], caption_correct=bool(record["caption_correct"]))
        )
    return labels


def score_against_gold(decisions: dict, gold: list[GoldLabel]) -> ScoreTriple:
    """Precision/recall/F1 of the accept class, treating accept as 'caption correct'."""
    missing = sorted(g.sample_id for g in gold if g.sample_id not in decisions)
    if missing:
        raise DataError(f"no final verdict for gold samples: {missing}")
    tp = sum(1 for g in gold if decisions[g.sample_id] and g.caption_correct)
    fp = sum(1 for g in gold if decisions[g.sample_id] and not g.caption_correct)
    fn = sum(1 for g in gold if not decisions[g.sample_id] and g.caption_correct)
    return ScoreTriple.from_counts(tp, tp + fp, tp + fn, len(gold))


class EventLog:
    """Append-only line-JSON log with monotonically increasing sequence numbers."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, event: dict) -> None:
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, ensure_ascii=False) + "\n")
            handle.flush()

    def replay(self, after_seq: int = 0):
        if not self.path.exists():
            return
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["seq"] > after_seq:
                    yield event


class ImageStore:
    """Content-addressed PNG store backing the /images endpoint."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        digest = content_hash(data).hex
        path = self.path_for(digest)
        if not path.exists():
            path.write_bytes(data)
        return digest

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.png"


class ReviewService:
    """In-memory review state rebuilt from the durable event log on boot."""

    def __init__(
        self,
        state_dir: str | Path,
        reconstruct_fn=None,
        lease_ttl: float = DEFAULT_LEASE_TTL,
        clock=time.time,
        route_render_failures_to_humans: bool = False,
        snapshot_every: int = 200,
    ):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.reconstruct_fn = reconstruct_fn
        self.lease_ttl = lease_ttl
        self.clock = clock
        self.route_render_failures_to_humans = route_render_failures_to_humans
        self.snapshot_every = snapshot_every
        self.log = EventLog(self.state_dir / "events.jsonl")
        self.images = ImageStore(self.state_dir / "images")
        self._snapshot_path = self.state_dir / "snapshot.json"
        self._lock = threading.RLock()
        self._items: dict[str, ReviewItem] = {}
        self._jobs: dict[str, str] = {}  # manifest digest -> job_id
        self._seq = 0
        self._boot()

    # ------------------------------------------------------------------
    # Durability

    def _boot(self) -> None:
        after = 0
        if self._snapshot_path.exists():
            snap = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            after = snap["seq"]
            self._seq = snap["seq"]
            self._jobs = dict(snap["jobs"])
            self._items = {
                d["item_id"]: ReviewItem.from_dict(d) for d in snap["items"]
            }
        for event in self.log.replay(after_seq=after):
            self._apply(event)
            self._seq = event["seq"]

    def _append(self, event: dict) -> dict:
        # Callers hold the lock: single-writer appender.
        self._seq += 1
        event = dict(event, seq=self._seq)
        self.log.append(event)
        self._apply(event)
        if self.snapshot_every and self._seq % self.snapshot_every == 0:
            self._write_snapshot()
        return event

    def _write_snapshot(self) -> None:
        snap = {
            "seq": self._seq,
            "jobs": self._jobs,
            "items": [item.to_dict() for item in self._items.values()],
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(snap, ensure_ascii=False), encoding="utf-8")
        tmp.replace(self._snapshot_path)

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "job_created":
            self._jobs[event["manifest_digest"]] = event["job_id"]
        elif kind == "item_created":
            item = ReviewItem(
                item_id=event["item_id"],
                sample_id=event["sample_id"],
                caption=event["caption"],
                original_image=event["original_image"],
                reconstructed_image=event["reconstructed_image"],
                status=event["status"],
                seq=event["seq"],
                chart_type=event.get("chart_type"),
                source_tag=event.get("source_tag"),
            )
            self._items[item.item_id] = item
        elif kind == "leased":
            item = self._items[event["item_id"]]
            item.status = "leased"
            item.lease = Lease(
                reviewer_id=event["reviewer_id"],
                granted_at=event["granted_at"],
                expires_at=event["expires_at"],
            )
        elif kind == "lease_expired":
            item = self._items[event["item_id"]]
            item.status = "pending"
            item.lease = None
        elif kind == "verdict":
            item = self._items[event["item_id"]]
            item.verdict = Verdict(
                decision=event["decision"],
                scenario=event["scenario"],
                reviewer_id=event["reviewer_id"],
                decision_seconds=event["decision_seconds"],
                timestamp=event["timestamp"],
            )
            if event["reviewer_id"] != SYSTEM_REVIEWER:
                item.status = "accepted" if event["decision"] == "accept" else "rejected"
            item.lease = None
        else:
            raise DataError(f"unknown event type in log: {kind!r}")

    # ------------------------------------------------------------------
    # Job intake

    def enqueue_job(self, manifest_path: str | Path) -> dict:
        """Reconstruct every manifest sample into review items (idempotent)."""
        manifest = load_manifest(manifest_path)
        digest = manifest.digest.hex
        with self._lock:
            if digest in self._jobs:
                return {"job_id": self._jobs[digest], "created": False}
            if self.reconstruct_fn is None:
                raise InfrastructureError("service has no reconstruction backend configured")
            job_id = f"job-{digest[:12]}"
            self._append(
                {
                    "type": "job_created",
                    "job_id": job_id,
                    "manifest_digest": digest,
                    "manifest_path": str(manifest_path),
                    "ts": self.clock(),
                }
            )
        for sample in manifest.samples:
            self._ingest_sample(job_id, manifest, sample)
        return {"job_id": job_id, "created": True}

    def _ingest_sample(self, job_id: str, manifest, sample: ChartSample) -> None:
        original_digest = self.images.put(manifest.resolve_image_path(sample).read_bytes())
        recon = self.reconstruct_fn(sample)
        reconstructed_digest = None
        if recon.status == "succeeded":
            reconstructed_digest = self.images.put(
                Path(recon.rendered_image_ref).read_bytes()
            )
            status = "pending"
        elif self.route_render_failures_to_humans:
            status = "pending"
        else:
            status = "render_failed"
        with self._lock:
            item_id = f"{job_id}.{sample.id}"
            self._append(
                {
                    "type": "item_created",
                    "item_id": item_id,
                    "job_id": job_id,
                    "sample_id": sample.id,
                    "caption": sample.caption,
                    "original_image": original_digest,
                    "reconstructed_image": reconstructed_digest,
                    "status": status,
                    "chart_type": sample.chart_type,
                    "source_tag": sample.source_tag,
                    "ts": self.clock(),
                }
            )
            if status == "render_failed":
                # Scenario C is assigned by the system, not shown to humans.
                self._append(
                    {
                        "type": "verdict",
                        "item_id": item_id,
                        "decision": "reject",
                        "scenario": "C_code_error",
                        "reviewer_id": SYSTEM_REVIEWER,
                        "decision_seconds": 0.0,
                        "timestamp": self.clock(),
                    }
                )

    # ------------------------------------------------------------------
    # Review loop

    def _expire_stale_leases(self, now: float) -> None:
        for item in self._items.values():
            if item.status == "leased" and item.lease and item.lease.expires_at <= now:
                self._append({"type": "lease_expired", "item_id": item.item_id, "ts": now})

    def sweep_expired_leases(self) -> int:
        """Requeue all expired leases; returns how many were released.

        next_review/submit already expire lazily; this is for the periodic
        background sweeper so abandoned items resurface without reads.
        """
        with self._lock:
            before = sum(1 for i in self._items.values() if i.status == "leased")
            self._expire_stale_leases(self.clock())
            return before - sum(1 for i in self._items.values() if i.status == "leased")

    def start_sweeper(self, interval: float = 30.0) -> threading.Thread:
        """Daemon thread running sweep_expired_leases every ``interval`` seconds."""

        def loop() -> None:
            while True:
                time.sleep(interval)
                self.sweep_expired_leases()

        thread = threading.Thread(target=loop, daemon=True, name="lease-sweeper")
        thread.start()
        return thread

    def next_review(self, reviewer_id: str) -> ReviewItem | None:
        """Lease the oldest pending item to this reviewer, or None when empty."""
        with self._lock:
            now = self.clock()
            self._expire_stale_leases(now)
            pending = [i for i in self._items.values() if i.status == "pending"]
            if not pending:
                return None
            item = min(pending, key=lambda i: i.seq)
            self._append(
                {
                    "type": "leased",
                    "item_id": item.item_id,
                    "reviewer_id": reviewer_id,
                    "granted_at": now,
                    "expires_at": now + self.lease_ttl,
                    "ts": now,
                }
            )
            return replace_copy(item)

    def submit_verdict(
        self, item_id: str, decision: str, scenario: str, reviewer_id: str
    ) -> ReviewItem:
        with self._lock:
            item = self._items.get(item_id)
            if item is None:
                raise DataError(f"unknown item {item_id!r}")
            if item.status in ("accepted", "rejected", "render_failed"):
                raise ConflictError(f"item {item_id} already decided")
            now = self.clock()
            if item.status != "leased" or item.lease is None:
                raise ConflictError(f"item {item_id} is not leased")
            if item.lease.expires_at <= now:
                self._append({"type": "lease_expired", "item_id": item_id, "ts": now})
                raise ConflictError(f"lease on item {item_id} expired")
            if item.lease.reviewer_id != reviewer_id:
                raise ConflictError(f"item {item_id} is leased by another reviewer")
            # Raises ContractError on an accept/scenario mismatch before logging.
            Verdict(
                decision=decision,
                scenario=scenario,
                reviewer_id=reviewer_id,
                decision_seconds=0.0,
                timestamp=now,
            )
            self._append(
                {
                    "type": "verdict",
                    "item_id": item_id,
                    "decision": decision,
                    "scenario": scenario,
                    "reviewer_id": reviewer_id,
                    "decision_seconds": now - item.lease.granted_at,
                    "timestamp": now,
                }
            )
            return replace_copy(item)

    # ------------------------------------------------------------------
    # Reporting

    def stats(self) -> dict:
        with self._lock:
            counts = {status: 0 for status in STATUSES}
            scenarios = {scenario: 0 for scenario in SCENARIOS}
            human_seconds = []
            for item in self._items.values():
                counts[item.status] += 1
                if item.verdict is not None:
                    scenarios[item.verdict.scenario] += 1
                    if item.verdict.reviewer_id != SYSTEM_REVIEWER:
                        human_seconds.append(item.verdict.decision_seconds)
            return {
                "counts": counts,
                "scenarios": scenarios,
                "queue_depth": counts["pending"],
                "decided": counts["accepted"] + counts["rejected"] + counts["render_failed"],
                "median_decision_seconds": (
                    statistics.median(human_seconds) if human_seconds else None
                ),
                "mean_decision_seconds": (
                    statistics.fmean(human_seconds) if human_seconds else None
                ),
            }

    def export_manifest(self, accepted_only: bool = True) -> str:
        """Line-JSON manifest of (by default) only the accepted samples."""
        with self._lock:
            items = sorted(self._items.values(), key=lambda i: i.seq)
            lines = []
            for item in items:
                if accepted_only and item.status != "accepted":
                    continue
                record = {
                    "id": item.sample_id,
                    "image": str(self.images.path_for(item.original_image)),
                    "caption": item.caption,
                }
                if item.chart_type:
                    record["chart_type"] = item.chart_type
                if item.source_tag:
                    record["source"] = item.source_tag
                lines.append(json.dumps(record, ensure_ascii=False))
            return "\n".join(lines) + ("\n" if lines else "")

    def gold_eval(self, gold: list[GoldLabel]) -> ScoreTriple:
        with self._lock:
            decisions: dict[str, bool] = {}
            for item in sorted(self._items.values(), key=lambda i: i.seq):
                if item.status == "accepted":
                    decisions[item.sample_id] = True
                elif item.status in ("rejected", "render_failed"):
                    decisions[item.sample_id] = False
        return score_against_gold(decisions, gold)


def replace_copy(item: ReviewItem) -> ReviewItem:
    """Detached copy so callers cannot mutate service state."""
    return ReviewItem.from_dict(item.to_dict())


def build_reconstruct_fn(backend, sandbox, prompts, max_attempts: int, image_dir: str | Path):
    """Standard reconstruction callable for service deployments."""
    from .reconstructor import reconstruct

    def fn(sample: ChartSample):
        return reconstruct(
            sample, backend, sandbox, prompts, max_attempts=max_attempts, image_dir=image_dir
        )

    return fn


def item_payload(item: ReviewItem) -> dict:
    payload = item.to_dict()
    payload["original_image_url"] = f"/images/{item.original_image}"
    payload["reconstructed_image_url"] = (
        f"/images/{item.reconstructed_image}" if item.reconstructed_image else None
    )
    return payload


# Defined at module level so FastAPI can resolve the (stringified) route
# annotations against module globals.
try:
    from pydantic import BaseModel as _BaseModel
except ImportError:  # pragma: no cover - pydantic ships with fastapi
    _BaseModel = object


class JobRequest(_BaseModel):
    manifest_path: str


class VerdictRequest(_BaseModel):
    decision: str
    scenario: str
    reviewer: str


class GoldRequest(_BaseModel):
    gold_path: str


def create_app(service: ReviewService):
    """HTTP JSON API over a ReviewService."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.responses import FileResponse, PlainTextResponse

    app = FastAPI(title="chartcycle review service")

    @app.post("/jobs")
    def post_job(body: JobRequest):
        try:
            return service.enqueue_job(body.manifest_path)
        except (OSError, DataError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/review/next")
    def get_next(reviewer: str):
        item = service.next_review(reviewer)
        if item is None:
            return Response(status_code=204)
        return item_payload(item)

    @app.post("/review/{item_id}")
    def post_verdict(item_id: str, body: VerdictRequest):
        try:
            item = service.submit_verdict(item_id, body.decision, body.scenario, body.reviewer)
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ContractError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except DataError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"item_id": item_id, "status": item.status}

    @app.get("/stats")
    def get_stats():
        return service.stats()

    @app.get("/export")
    def get_export(accepted_only: bool = True):
        return PlainTextResponse(service.export_manifest(accepted_only=accepted_only))

    @app.post("/gold-eval")
    def post_gold_eval(body: GoldRequest):
        try:
            triple = service.gold_eval(load_gold(body.gold_path))
        except OSError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except DataError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return triple.to_dict()

    @app.get("/images/{digest}")
    def get_image(digest: str):
        path = service.images.path_for(digest)
        if not path.exists():
            raise HTTPException(status_code=404, detail="unknown image")
        return FileResponse(path, media_type="image/png")

    return app
