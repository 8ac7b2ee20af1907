export type Decision = "accept" | "reject";

export type Scenario =
  | "A_incorrect_caption"
  | "B_insufficient_detail"
  | "C_code_error"
  | "D_pass";

export type RejectScenario = Exclude<Scenario, "D_pass">;

export interface Lease {
  reviewer_id: string;
  granted_at: number;
  expires_at: number;
}

export interface ReviewItemPayload {
  item_id: string;
  sample_id: string;
  caption: string;
  status: string;
  original_image_url: string;
  reconstructed_image_url: string | null;
  lease: Lease | null;
}

export interface Stats {
  counts: Record<string, number>;
  scenarios: Record<string, number>;
  queue_depth: number;
  median_decision_seconds: number | null;
  mean_decision_seconds: number | null;
}

export interface SessionCounts {
  accepted: number;
  rejected: number;
  byScenario: Record<Scenario, number>;
}

export function emptyCounts(): SessionCounts {
  return {
    accepted: 0,
    rejected: 0,
    byScenario: {
      A_incorrect_caption: 0,
      B_insufficient_detail: 0,
      C_code_error: 0,
      D_pass: 0,
    },
  };
}
