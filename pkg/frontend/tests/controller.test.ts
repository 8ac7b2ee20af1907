import { describe, expect, it } from "vitest";

import { ConflictError, ServiceError, type ServiceClient } from "../src/api.js";
import { ReviewController, type ControllerState, type View } from "../src/controller.js";
import type { Decision, ReviewItemPayload, Scenario, Stats } from "../src/types.js";

function item(id: string): ReviewItemPayload {
  return {
    item_id: id,
    sample_id: `sample-${id}`,
    caption: `caption for ${id}`,
    status: "leased",
    original_image_url: `/images/orig-${id}`,
    reconstructed_image_url: `/images/recon-${id}`,
    lease: { reviewer_id: "rev", granted_at: 0, expires_at: 300 },
  };
}

interface SubmitRecord {
  itemId: string;
  decision: Decision;
  scenario: Scenario;
}

/** Scripted stand-in for the verification service. */
class MockClient implements ServiceClient {
  queue: ReviewItemPayload[] = [];
  acknowledged: SubmitRecord[] = [];
  conflictsRemaining = 0;
  submitNetworkFailures = 0;
  nextNetworkFailures = 0;
  medianSeconds: number | null = 6;

  async nextItem(): Promise<ReviewItemPayload | null> {
    if (this.nextNetworkFailures > 0) {
      this.nextNetworkFailures -= 1;
      throw new TypeError("fetch failed");
    }
    return this.queue.shift() ?? null;
  }

  async submitVerdict(
    itemId: string,
    decision: Decision,
    scenario: Scenario,
  ): Promise<void> {
    if (this.submitNetworkFailures > 0) {
      this.submitNetworkFailures -= 1;
      throw new TypeError("fetch failed");
    }
    if (this.conflictsRemaining > 0) {
      this.conflictsRemaining -= 1;
      throw new ConflictError("lease expired");
    }
    this.acknowledged.push({ itemId, decision, scenario });
  }

  async stats(): Promise<Stats> {
    return {
      counts: { pending: this.queue.length },
      scenarios: {},
      queue_depth: this.queue.length,
      median_decision_seconds: this.medianSeconds,
      mean_decision_seconds: this.medianSeconds,
    };
  }
}

class RecordingView implements View {
  states: ControllerState[] = [];
  render(state: ControllerState): void {
    this.states.push(structuredClone(state));
  }
}

function makeController(client: MockClient) {
  const view = new RecordingView();
  const controller = new ReviewController(client, "rev", view, {
    retryDelayMs: 0,
    sleep: async () => {},
    clock: () => 1000,
  });
  return { controller, view };
}

/** Drives the happy path the way the browser does: images load, then keys. */
async function reviewOne(controller: ReviewController, key: string) {
  controller.imagesReady();
  await controller.handleKey(key);
}

describe("fetch -> keyboard accept -> next item", () => {
  it("walks the queue and counts only acknowledged verdicts", async () => {
    const client = new MockClient();
    client.queue = [item("i1"), item("i2")];
    const { controller } = makeController(client);
    await controller.start();

    expect(controller.state.phase).toBe("reviewing");
    expect(controller.state.item?.item_id).toBe("i1");
    expect(controller.state.imagesLoaded).toBe(false);

    await reviewOne(controller, "a");
    expect(controller.state.item?.item_id).toBe("i2");
    expect(controller.state.counts.accepted).toBe(1);

    await reviewOne(controller, "2");
    expect(controller.state.phase).toBe("done");
    expect(controller.state.counts).toMatchObject({ accepted: 1, rejected: 1 });
    expect(controller.state.counts.byScenario.B_insufficient_detail).toBe(1);

    // Session counts equal the SUT-acknowledged POSTs, nothing phantom.
    expect(client.acknowledged).toEqual([
      { itemId: "i1", decision: "accept", scenario: "D_pass" },
      { itemId: "i2", decision: "reject", scenario: "B_insufficient_detail" },
    ]);
  });

  it("is operable end-to-end with keyboard only", async () => {
    const client = new MockClient();
    client.queue = [item("k1"), item("k2"), item("k3"), item("k4")];
    const { controller } = makeController(client);
    await controller.start();
    for (const key of ["a", "1", "2", "3"]) {
      await reviewOne(controller, key);
    }
    expect(controller.state.phase).toBe("done");
    expect(client.acknowledged.map((record) => record.scenario)).toEqual([
      "D_pass",
      "A_incorrect_caption",
      "B_insufficient_detail",
      "C_code_error",
    ]);
  });
});

describe("lease expiry (409) path", () => {
  it("refetches the item without corrupting session counts", async () => {
    const client = new MockClient();
    client.queue = [item("x1")];
    client.conflictsRemaining = 1;
    const { controller } = makeController(client);
    await controller.start();

    // Simulated TTL expiry: the first submit 409s; the service re-leases the
    // same item on the next fetch.
    client.queue = [item("x1")];
    await reviewOne(controller, "a");
    expect(controller.state.phase).toBe("reviewing");
    expect(controller.state.item?.item_id).toBe("x1");
    expect(controller.state.counts.accepted).toBe(0);
    expect(client.acknowledged).toEqual([]);

    await reviewOne(controller, "a");
    expect(controller.state.counts.accepted).toBe(1);
    expect(client.acknowledged).toHaveLength(1);
  });
});

describe("guards", () => {
  it("ignores verdicts until both images have loaded", async () => {
    const client = new MockClient();
    client.queue = [item("g1")];
    const { controller } = makeController(client);
    await controller.start();
    await controller.handleKey("a"); // imagesReady() never called
    expect(client.acknowledged).toEqual([]);
    expect(controller.state.item?.item_id).toBe("g1");
  });

  it("ignores unmapped keys", async () => {
    const client = new MockClient();
    client.queue = [item("g2")];
    const { controller } = makeController(client);
    await controller.start();
    controller.imagesReady();
    expect(await controller.handleKey("q")).toBe(false);
    expect(client.acknowledged).toEqual([]);
  });
});

describe("empty queue and failure handling", () => {
  it("shows the completion state with session counts", async () => {
    const client = new MockClient();
    const { controller } = makeController(client);
    await controller.start();
    expect(controller.state.phase).toBe("done");
    expect(controller.state.counts.accepted).toBe(0);
  });

  it("keeps state across a connectivity failure and recovers on retry", async () => {
    const client = new MockClient();
    client.queue = [item("n1")];
    const { controller } = makeController(client);
    await controller.start();

    // The fetch after this verdict fails at the transport level.
    client.nextNetworkFailures = 1;
    await reviewOne(controller, "a");
    expect(client.acknowledged).toHaveLength(1);
    expect(controller.state.phase).toBe("error");
    expect(controller.state.banner).toContain("service unreachable");
    expect(controller.state.counts.accepted).toBe(1); // no state loss

    client.queue = [item("n2")];
    await controller.retry();
    expect(controller.state.phase).toBe("reviewing");
    expect(controller.state.item?.item_id).toBe("n2");
    expect(controller.state.counts.accepted).toBe(1);
  });

  it("retries a failed verdict POST once before surfacing", async () => {
    const client = new MockClient();
    client.queue = [item("r1")];
    client.submitNetworkFailures = 1; // first POST fails, retry succeeds
    const { controller } = makeController(client);
    await controller.start();
    await reviewOne(controller, "a");
    expect(client.acknowledged).toHaveLength(1);
    expect(controller.state.counts.accepted).toBe(1);
  });

  it("surfaces a double transport failure without counting", async () => {
    const client = new MockClient();
    client.queue = [item("r2")];
    client.submitNetworkFailures = 2;
    const { controller } = makeController(client);
    await controller.start();
    await reviewOne(controller, "a");
    expect(client.acknowledged).toEqual([]);
    expect(controller.state.counts.accepted).toBe(0);
    expect(controller.state.banner).toContain("verdict not recorded");
    expect(controller.state.phase).toBe("reviewing"); // item still up for retry
  });
});

describe("stats are the single source of truth", () => {
  it("displays the server median, not a local computation", async () => {
    const client = new MockClient();
    client.queue = [item("s1")];
    client.medianSeconds = 42.5;
    const { controller } = makeController(client);
    await controller.start();
    expect(controller.state.medianDecisionSeconds).toBe(42.5);
    expect(controller.state.queueDepth).toBe(0);
  });
});

describe("http error mapping", () => {
  it("treats ServiceError(422) as a surfaced failure, not a conflict", async () => {
    const client = new MockClient();
    client.queue = [item("e1")];
    client.submitVerdict = async () => {
      throw new ServiceError(422, "bad scenario");
    };
    const { controller } = makeController(client);
    await controller.start();
    await reviewOne(controller, "a");
    expect(controller.state.banner).toContain("verdict not recorded");
  });
});
