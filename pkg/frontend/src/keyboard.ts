import type { RejectScenario } from "./types.js";

export type KeyAction =
  | { kind: "accept" }
  | { kind: "reject"; scenario: RejectScenario }
  | { kind: "zoom"; factor: number }
  | { kind: "pan"; dx: number; dy: number }
  | { kind: "reset-view" }
  | { kind: "toggle-blend" };

const REJECT_KEYS: Record<string, RejectScenario> = {
  "1": "A_incorrect_caption",
  "2": "B_insufficient_detail",
  "3": "C_code_error",
};

const PAN_STEP = 40;

/** Keyboard map: `a` accept, `1`/`2`/`3` reject A/B/C, view keys otherwise. */
export function actionForKey(key: string): KeyAction | null {
  if (key === "a" || key === "A") return { kind: "accept" };
  const scenario = REJECT_KEYS[key];
  if (scenario) return { kind: "reject", scenario };
  switch (key) {
    case "+":
    case "=":
      return { kind: "zoom", factor: 1.25 };
    case "-":
    case "_":
      return { kind: "zoom", factor: 0.8 };
    case "0":
      return { kind: "reset-view" };
    case "b":
    case "B":
      return { kind: "toggle-blend" };
    case "ArrowLeft":
      return { kind: "pan", dx: PAN_STEP, dy: 0 };
    case "ArrowRight":
      return { kind: "pan", dx: -PAN_STEP, dy: 0 };
    case "ArrowUp":
      return { kind: "pan", dx: 0, dy: PAN_STEP };
    case "ArrowDown":
      return { kind: "pan", dx: 0, dy: -PAN_STEP };
    default:
      return null;
  }
}
