import { ConflictError, type ServiceClient } from "./api.js";
import { actionForKey } from "./keyboard.js";
import {
  emptyCounts,
  type Decision,
  type ReviewItemPayload,
  type Scenario,
  type SessionCounts,
} from "./types.js";

export type Phase = "idle" | "loading" | "reviewing" | "submitting" | "done" | "error";

export interface ControllerState {
  phase: Phase;
  item: ReviewItemPayload | null;
  /** Verdicts stay disabled until both images have finished loading. */
  imagesLoaded: boolean;
  counts: SessionCounts;
  queueDepth: number | null;
  /** Server-side median; the UI never computes its own. */
  medianDecisionSeconds: number | null;
  banner: string | null;
  itemShownAt: number | null;
}

export interface View {
  render(state: ControllerState): void;
}

export interface ControllerOptions {
  clock?: () => number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ReviewController {
  readonly state: ControllerState;
  private readonly clock: () => number;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private readonly client: ServiceClient,
    private readonly reviewer: string,
    private readonly view: View,
    options: ControllerOptions = {},
  ) {
    this.clock = options.clock ?? (() => Date.now());
    this.retryDelayMs = options.retryDelayMs ?? 500;
    this.sleep = options.sleep ?? defaultSleep;
    this.state = {
      phase: "idle",
      item: null,
      imagesLoaded: false,
      counts: emptyCounts(),
      queueDepth: null,
      medianDecisionSeconds: null,
      banner: null,
      itemShownAt: null,
    };
  }

  async start(): Promise<void> {
    await this.fetchNext();
  }

  /** Lease the next item. Session counts survive every failure path. */
  async fetchNext(): Promise<void> {
    this.update({ phase: "loading", item: null, imagesLoaded: false, banner: null });
    let item: ReviewItemPayload | null;
    try {
      item = await this.client.nextItem(this.reviewer);
    } catch (error) {
      this.update({ phase: "error", banner: `service unreachable: ${message(error)}` });
      return;
    }
    await this.refreshStats();
    if (item === null) {
      this.update({ phase: "done", item: null, itemShownAt: null });
      return;
    }
    this.update({
      phase: "reviewing",
      item,
      imagesLoaded: false,
      itemShownAt: this.clock(),
      banner: null,
    });
  }

  /** The view calls this once both chart images have loaded. */
  imagesReady(): void {
    if (this.state.phase === "reviewing") {
      this.update({ imagesLoaded: true });
    }
  }

  /** Retry after a connectivity banner; never clears session counts. */
  async retry(): Promise<void> {
    if (this.state.phase === "error") {
      await this.fetchNext();
    }
  }

  async submit(decision: Decision, scenario: Scenario): Promise<void> {
    const { phase, item, imagesLoaded } = this.state;
    if (phase !== "reviewing" || item === null || !imagesLoaded) return;
    if ((decision === "accept") !== (scenario === "D_pass")) {
      this.update({ banner: "accept pairs with D_pass; rejects need a scenario tag" });
      return;
    }
    this.update({ phase: "submitting" });
    try {
      await this.postWithOneRetry(item.item_id, decision, scenario);
    } catch (error) {
      if (error instanceof ConflictError) {
        // Stale lease: refetch the item; counts must not change.
        this.update({ banner: "lease expired, refetching" });
        await this.fetchNext();
        return;
      }
      this.update({
        phase: "reviewing",
        banner: `verdict not recorded: ${message(error)}`,
      });
      return;
    }
    // Only 200-acknowledged verdicts reach the session counts.
    const counts = { ...this.state.counts, byScenario: { ...this.state.counts.byScenario } };
    if (decision === "accept") counts.accepted += 1;
    else counts.rejected += 1;
    counts.byScenario[scenario] += 1;
    this.update({ counts });
    await this.fetchNext();
  }

  /** Keyboard-first operation; unmapped keys are ignored. */
  async handleKey(key: string): Promise<boolean> {
    const action = actionForKey(key);
    if (action === null) return false;
    if (action.kind === "accept") {
      await this.submit("accept", "D_pass");
      return true;
    }
    if (action.kind === "reject") {
      await this.submit("reject", action.scenario);
      return true;
    }
    // View-level actions (zoom/pan/blend) are handled by the DOM layer.
    return false;
  }

  private async postWithOneRetry(
    itemId: string,
    decision: Decision,
    scenario: Scenario,
  ): Promise<void> {
    try {
      await this.client.submitVerdict(itemId, decision, scenario, this.reviewer);
    } catch (error) {
      if (error instanceof ConflictError) throw error;
      await this.sleep(this.retryDelayMs);
      await this.client.submitVerdict(itemId, decision, scenario, this.reviewer);
    }
  }

  private async refreshStats(): Promise<void> {
    try {
      const stats = await this.client.stats();
      this.update({
        queueDepth: stats.queue_depth,
        medianDecisionSeconds: stats.median_decision_seconds,
      });
    } catch {
      // Stats are advisory; never block the review flow on them.
    }
  }

  private update(patch: Partial<ControllerState>): void {
    Object.assign(this.state, patch);
    this.view.render(this.state);
  }
}

function message(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
