import json
import threading

import pytest
from fastapi.testclient import TestClient

from chartcycle.core import ChartSample, dump_manifest
from chartcycle.errors import ConflictError, ContractError, DataError
from chartcycle.ocr import ScoreTriple
from chartcycle.service import (
    GoldLabel,
    ReviewService,
    create_app,
    load_gold,
    score_against_gold,
)

from conftest import TINY_PNG, make_fake_reconstructor


class FakeClock:
    def __init__(self, now=1_000.0):
        self.now = now

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


def write_manifest(tmp_path, n=5, prefix="s"):
    images = tmp_path / "imgs"
    images.mkdir(exist_ok=True)
    samples = []
    for i in range(n):
        path = images / f"{prefix}{i}.png"
        path.write_bytes(TINY_PNG)
        samples.append(
            ChartSample(id=f"{prefix}{i}", image_ref=str(path), caption=f"caption {i}")
        )
    return dump_manifest(samples, tmp_path / f"{prefix}manifest.jsonl")


@pytest.fixture
def service(tmp_path):
    return ReviewService(
        tmp_path / "state",
        reconstruct_fn=make_fake_reconstructor(tmp_path / "renders"),
        lease_ttl=300.0,
        clock=FakeClock(),
    )


def decide_all(service, reviewer="rev", decisions=None):
    """Drain the queue, applying (decision, scenario) per sample id."""
    while True:
        item = service.next_review(reviewer)
        if item is None:
            return
        decision, scenario = (decisions or {}).get(item.sample_id, ("accept", "D_pass"))
        service.submit_verdict(item.item_id, decision, scenario, reviewer)


# ---------------------------------------------------------------------------
# enqueue


def test_enqueue_populates_pending_items(service, tmp_path):
    manifest = write_manifest(tmp_path, n=5)
    result = service.enqueue_job(manifest)
    assert result["created"] is True
    stats = service.stats()
    assert stats["counts"]["pending"] == 5
    assert stats["queue_depth"] == 5


def test_enqueue_is_idempotent(service, tmp_path):
    manifest = write_manifest(tmp_path, n=3)
    first = service.enqueue_job(manifest)
    second = service.enqueue_job(manifest)
    assert second == {"job_id": first["job_id"], "created": False}
    assert service.stats()["counts"]["pending"] == 3


def test_render_failure_is_auto_rejected_scenario_c(tmp_path):
    service = ReviewService(
        tmp_path / "state",
        reconstruct_fn=make_fake_reconstructor(tmp_path / "renders", fail_ids={"s2"}),
        clock=FakeClock(),
    )
    service.enqueue_job(write_manifest(tmp_path, n=5))
    stats = service.stats()
    assert stats["counts"]["pending"] == 4
    assert stats["counts"]["render_failed"] == 1
    assert stats["scenarios"]["C_code_error"] == 1
    # The failed item never enters the review queue.
    seen = set()
    while (item := service.next_review("rev")) is not None:
        seen.add(item.sample_id)
        service.submit_verdict(item.item_id, "accept", "D_pass", "rev")
    assert "s2" not in seen


# ---------------------------------------------------------------------------
# leases


def test_concurrent_reviewers_get_disjoint_items(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=2))
    first = service.next_review("alice")
    second = service.next_review("bob")
    assert first.item_id != second.item_id
    assert first.lease.reviewer_id == "alice"


def test_expired_lease_returns_to_queue(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=1))
    item = service.next_review("alice")
    assert service.next_review("bob") is None
    service.clock.advance(301)
    reissued = service.next_review("bob")
    assert reissued is not None
    assert reissued.item_id == item.item_id
    assert reissued.lease.reviewer_id == "bob"


def test_sweeper_requeues_expired_leases(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=2))
    service.next_review("alice")
    service.next_review("bob")
    assert service.sweep_expired_leases() == 0
    service.clock.advance(301)
    assert service.sweep_expired_leases() == 2
    assert service.stats()["counts"]["pending"] == 2


def test_empty_queue_returns_none(service):
    assert service.next_review("rev") is None


def test_fifo_ordering(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=3))
    order = [service.next_review("rev").sample_id for _ in range(3)]
    assert order == ["s0", "s1", "s2"]


def test_no_double_leasing_under_concurrency(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=12))
    leased: list[str] = []
    lock = threading.Lock()

    def worker(reviewer):
        while True:
            item = service.next_review(reviewer)
            if item is None:
                return
            with lock:
                leased.append(item.item_id)

    threads = [threading.Thread(target=worker, args=(f"r{i}",)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(leased) == 12
    assert len(set(leased)) == 12


# ---------------------------------------------------------------------------
# verdicts


def test_accept_d_pass(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=1))
    item = service.next_review("rev")
    stored = service.submit_verdict(item.item_id, "accept", "D_pass", "rev")
    assert stored.status == "accepted"
    assert stored.verdict.scenario == "D_pass"


def test_accept_with_reject_scenario_is_contract_error(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=1))
    item = service.next_review("rev")
    with pytest.raises(ContractError):
        service.submit_verdict(item.item_id, "accept", "A_incorrect_caption", "rev")
    with pytest.raises(ContractError):
        service.submit_verdict(item.item_id, "reject", "D_pass", "rev")


def test_submit_after_ttl_conflicts_and_requeues(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=1))
    item = service.next_review("rev")
    service.clock.advance(400)
    with pytest.raises(ConflictError):
        service.submit_verdict(item.item_id, "accept", "D_pass", "rev")
    assert service.stats()["counts"]["pending"] == 1


def test_wrong_reviewer_conflicts(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=1))
    item = service.next_review("alice")
    with pytest.raises(ConflictError):
        service.submit_verdict(item.item_id, "accept", "D_pass", "mallory")


def test_double_verdict_conflicts(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=1))
    item = service.next_review("rev")
    service.submit_verdict(item.item_id, "accept", "D_pass", "rev")
    with pytest.raises(ConflictError):
        service.submit_verdict(item.item_id, "reject", "A_incorrect_caption", "rev")


def test_decision_seconds_measured_from_lease_grant(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=3))
    for elapsed in (2, 4, 100):
        item = service.next_review("rev")
        service.clock.advance(elapsed)
        stored = service.submit_verdict(item.item_id, "accept", "D_pass", "rev")
        assert stored.verdict.decision_seconds == pytest.approx(elapsed)
    stats = service.stats()
    assert stats["median_decision_seconds"] == pytest.approx(4)
    assert stats["mean_decision_seconds"] == pytest.approx((2 + 4 + 100) / 3)


# ---------------------------------------------------------------------------
# stats / export / gold


def test_fresh_service_stats_zero(service):
    stats = service.stats()
    assert all(count == 0 for count in stats["counts"].values())
    assert stats["median_decision_seconds"] is None


def test_stats_counts_and_scenarios(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=4))
    decisions = {
        "s0": ("accept", "D_pass"),
        "s1": ("accept", "D_pass"),
        "s2": ("accept", "D_pass"),
        "s3": ("reject", "B_insufficient_detail"),
    }
    decide_all(service, decisions=decisions)
    stats = service.stats()
    assert stats["counts"]["accepted"] == 3
    assert stats["counts"]["rejected"] == 1
    assert stats["scenarios"]["D_pass"] == 3
    assert stats["scenarios"]["B_insufficient_detail"] == 1


def test_export_accepted_only(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=3))
    decisions = {"s1": ("reject", "A_incorrect_caption")}
    decide_all(service, decisions=decisions)
    exported = [json.loads(line) for line in service.export_manifest().splitlines()]
    assert [record["id"] for record in exported] == ["s0", "s2"]
    assert all("caption" in record and "image" in record for record in exported)


def test_gold_eval_paper_confusion_pattern():
    # 10 correct captions, 5 incorrect; accept 9 correct, reject everything else.
    gold = [GoldLabel(f"c{i}", True) for i in range(10)] + [
        GoldLabel(f"w{i}", False) for i in range(5)
    ]
    decisions = {f"c{i}": i != 0 for i in range(10)}
    decisions.update({f"w{i}": False for i in range(5)})
    triple = score_against_gold(decisions, gold)
    assert triple.precision == pytest.approx(1.0)
    assert triple.recall == pytest.approx(0.9)
    assert triple.f1 == pytest.approx(0.947, abs=0.0005)


def test_gold_eval_all_correct():
    gold = [GoldLabel("a", True), GoldLabel("b", False)]
    triple = score_against_gold({"a": True, "b": False}, gold)
    assert (triple.precision, triple.recall, triple.f1) == (1.0, 1.0, 1.0)


def test_gold_eval_accept_everything():
    gold = [GoldLabel(f"g{i}", i < 5) for i in range(10)]
    triple = score_against_gold({f"g{i}": True for i in range(10)}, gold)
    assert triple.precision == pytest.approx(0.5)
    assert triple.recall == pytest.approx(1.0)
    assert triple.f1 == pytest.approx(2 / 3)


def test_gold_eval_missing_verdicts_listed(service, tmp_path):
    service.enqueue_job(write_manifest(tmp_path, n=2))
    with pytest.raises(DataError, match="s0"):
        service.gold_eval([GoldLabel("s0", True)])


# ---------------------------------------------------------------------------
# durability


def test_reboot_reproduces_state(tmp_path):
    clock = FakeClock()
    state_dir = tmp_path / "state"
    service = ReviewService(
        state_dir,
        reconstruct_fn=make_fake_reconstructor(tmp_path / "renders", fail_ids={"s3"}),
        clock=clock,
    )
    service.enqueue_job(write_manifest(tmp_path, n=6))
    decisions = {
        "s0": ("accept", "D_pass"),
        "s1": ("reject", "A_incorrect_caption"),
        "s2": ("reject", "B_insufficient_detail"),
    }
    for _ in range(3):
        item = service.next_review("rev")
        clock.advance(3)
        decision, scenario = decisions[item.sample_id]
        service.submit_verdict(item.item_id, decision, scenario, "rev")
    item = service.next_review("rev")  # leave one leased
    before = service.stats()

    rebooted = ReviewService(state_dir, clock=clock)
    assert rebooted.stats() == before
    # Leases survive the reboot; the leased item is not double-issued.
    assert rebooted.next_review("other") is not None or before["counts"]["pending"] == 0


def test_snapshot_plus_tail_replay(tmp_path):
    clock = FakeClock()
    state_dir = tmp_path / "state"
    service = ReviewService(
        state_dir,
        reconstruct_fn=make_fake_reconstructor(tmp_path / "renders"),
        clock=clock,
        snapshot_every=3,
    )
    service.enqueue_job(write_manifest(tmp_path, n=4))
    decide_all(service)
    assert (state_dir / "snapshot.json").exists()
    rebooted = ReviewService(state_dir, clock=clock, snapshot_every=3)
    assert rebooted.stats() == service.stats()


# ---------------------------------------------------------------------------
# HTTP API


@pytest.fixture
def client(tmp_path):
    service = ReviewService(
        tmp_path / "state",
        reconstruct_fn=make_fake_reconstructor(tmp_path / "renders", fail_ids={"h4"}),
        clock=FakeClock(),
    )
    app = create_app(service)
    return TestClient(app), service, tmp_path


def test_http_full_review_flow(client):
    http, service, tmp_path = client
    manifest = write_manifest(tmp_path, n=5, prefix="h")
    created = http.post("/jobs", json={"manifest_path": str(manifest)})
    assert created.status_code == 200
    assert created.json()["created"] is True

    item = http.get("/review/next", params={"reviewer": "rev"}).json()
    assert item["status"] == "leased"
    assert item["original_image_url"].startswith("/images/")
    image = http.get(item["original_image_url"])
    assert image.status_code == 200
    assert image.content == TINY_PNG

    verdict = http.post(
        f"/review/{item['item_id']}",
        json={"decision": "accept", "scenario": "D_pass", "reviewer": "rev"},
    )
    assert verdict.status_code == 200
    assert verdict.json()["status"] == "accepted"

    stats = http.get("/stats").json()
    assert stats["counts"]["accepted"] == 1
    assert stats["counts"]["render_failed"] == 1


def test_http_conflict_and_validation_codes(client):
    http, service, tmp_path = client
    manifest = write_manifest(tmp_path, n=2, prefix="h")
    http.post("/jobs", json={"manifest_path": str(manifest)})
    item = http.get("/review/next", params={"reviewer": "rev"}).json()

    bad_scenario = http.post(
        f"/review/{item['item_id']}",
        json={"decision": "accept", "scenario": "A_incorrect_caption", "reviewer": "rev"},
    )
    assert bad_scenario.status_code == 422

    service.clock.advance(9_999)
    expired = http.post(
        f"/review/{item['item_id']}",
        json={"decision": "accept", "scenario": "D_pass", "reviewer": "rev"},
    )
    assert expired.status_code == 409

    unknown = http.post(
        "/review/nope",
        json={"decision": "accept", "scenario": "D_pass", "reviewer": "rev"},
    )
    assert unknown.status_code == 404


def test_http_empty_queue_204(client):
    http, _, _ = client
    assert http.get("/review/next", params={"reviewer": "rev"}).status_code == 204


def test_http_export_and_gold_eval(client):
    http, service, tmp_path = client
    manifest = write_manifest(tmp_path, n=3, prefix="h")
    http.post("/jobs", json={"manifest_path": str(manifest)})
    decide_all(service, decisions={"h1": ("reject", "A_incorrect_caption")})

    export = http.get("/export", params={"accepted_only": "true"})
    ids = [json.loads(line)["id"] for line in export.text.splitlines()]
    assert ids == ["h0", "h2"]

    gold_path = tmp_path / "gold.jsonl"
    gold_path.write_text(
        "\n".join(
            json.dumps({"sample_id": sid, "caption_correct": sid != "h1"})
            for sid in ("h0", "h1", "h2")
        )
        + "\n",
        encoding="utf-8",
    )
    result = http.post("/gold-eval", json={"gold_path": str(gold_path)})
    assert result.status_code == 200
    assert result.json() == ScoreTriple(1.0, 1.0, 1.0, 3).to_dict()
    assert load_gold(gold_path)[0].sample_id == "h0"


def test_http_missing_manifest_400(client):
    http, _, _ = client
    response = http.post("/jobs", json={"manifest_path": "/does/not/exist.jsonl"})
    assert response.status_code == 400
