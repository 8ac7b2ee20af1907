import type { Decision, ReviewItemPayload, Scenario, Stats } from "./types.js";

/** Lease conflict (HTTP 409): the item must be refetched, never recounted. */
export class ConflictError extends Error {}

/** Any other non-OK response from the service. */
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface ServiceClient {
  nextItem(reviewer: string): Promise<ReviewItemPayload | null>;
  submitVerdict(
    itemId: string,
    decision: Decision,
    scenario: Scenario,
    reviewer: string,
  ): Promise<void>;
  stats(): Promise<Stats>;
}

async function detailOf(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: unknown };
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    return res.statusText;
  }
}

export class HttpServiceClient implements ServiceClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  async nextItem(reviewer: string): Promise<ReviewItemPayload | null> {
    const res = await this.fetchFn(
      `${this.baseUrl}/review/next?reviewer=${encodeURIComponent(reviewer)}`,
    );
    if (res.status === 204) return null;
    if (!res.ok) throw new ServiceError(res.status, await detailOf(res));
    return (await res.json()) as ReviewItemPayload;
  }

  async submitVerdict(
    itemId: string,
    decision: Decision,
    scenario: Scenario,
    reviewer: string,
  ): Promise<void> {
    const res = await this.fetchFn(`${this.baseUrl}/review/${encodeURIComponent(itemId)}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ decision, scenario, reviewer }),
    });
    if (res.status === 409) throw new ConflictError(await detailOf(res));
    if (!res.ok) throw new ServiceError(res.status, await detailOf(res));
  }

  async stats(): Promise<Stats> {
    const res = await this.fetchFn(`${this.baseUrl}/stats`);
    if (!res.ok) throw new ServiceError(res.status, await detailOf(res));
    return (await res.json()) as Stats;
  }
}
