import { HttpServiceClient } from "./api.js";
import { ReviewController } from "./controller.js";
import { actionForKey } from "./keyboard.js";
import { DomView } from "./view-dom.js";

function reviewerId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("reviewer");
  if (fromQuery) {
    localStorage.setItem("reviewer", fromQuery);
    return fromQuery;
  }
  const stored = localStorage.getItem("reviewer");
  if (stored) return stored;
  const generated = `rev-${Math.random().toString(36).slice(2, 8)}`;
  localStorage.setItem("reviewer", generated);
  return generated;
}

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const view = new DomView(root);
  // The UI is served from /ui/, the API from the service root.
  const controller = new ReviewController(new HttpServiceClient(""), reviewerId(), view);
  view.onImagesReady = () => controller.imagesReady();
  view.onRetry = () => void controller.retry();

  window.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) {
      return;
    }
    const action = actionForKey(event.key);
    if (action === null) return;
    event.preventDefault();
    if (action.kind === "accept" || action.kind === "reject") {
      void controller.handleKey(event.key);
    } else {
      view.applyViewAction(action);
    }
  });

  void controller.start();
}

bootstrap();
