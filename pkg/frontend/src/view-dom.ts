import type { ControllerState, View } from "./controller.js";
import type { KeyAction } from "./keyboard.js";

interface ViewTransform {
  scale: number;
  x: number;
  y: number;
}

/** Renders the side-by-side comparison; pan/zoom is synchronized across both panes. */
export class DomView implements View {
  private readonly transform: ViewTransform = { scale: 1, x: 0, y: 0 };
  private blend = false;
  private timer: number | undefined;
  private lastState: ControllerState | null = null;

  constructor(private readonly root: HTMLElement) {
    this.root.innerHTML = `
      <header class="bar">
        <span id="queue"></span>
        <span id="session"></span>
        <span id="median"></span>
        <span id="elapsed"></span>
      </header>
      <div id="banner" class="banner" hidden></div>
      <main id="main">
        <section class="compare">
          <figure>
            <figcaption>original</figcaption>
            <div class="pane"><img id="img-original" alt="original chart" /></div>
          </figure>
          <figure>
            <figcaption>reconstructed</figcaption>
            <div class="pane"><img id="img-reconstructed" alt="reconstructed chart" /></div>
          </figure>
        </section>
        <p id="caption" class="caption"></p>
        <footer class="actions">
          <button id="accept" data-key="a">accept <kbd>a</kbd></button>
          <button id="reject-a" data-key="1">incorrect caption <kbd>1</kbd></button>
          <button id="reject-b" data-key="2">insufficient detail <kbd>2</kbd></button>
          <button id="reject-c" data-key="3">code error <kbd>3</kbd></button>
        </footer>
      </main>
      <div id="done" class="done" hidden></div>
    `;
  }

  /** Wired by main.ts: notifies the controller when both images are loaded. */
  onImagesReady: () => void = () => {};
  onRetry: () => void = () => {};

  render(state: ControllerState): void {
    this.lastState = state;
    const queue = this.el("queue");
    queue.textContent = state.queueDepth === null ? "" : `queue: ${state.queueDepth}`;
    this.el("session").textContent =
      `session: ${state.counts.accepted} accepted / ${state.counts.rejected} rejected`;
    this.el("median").textContent =
      state.medianDecisionSeconds === null
        ? ""
        : `median decision: ${state.medianDecisionSeconds.toFixed(1)}s`;

    const banner = this.el("banner");
    banner.hidden = state.banner === null;
    if (state.banner !== null) {
      banner.textContent = state.banner;
      if (state.phase === "error") {
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.onclick = () => this.onRetry();
        banner.append(" ", retry);
      }
    }

    const main = this.el("main");
    const done = this.el("done");
    if (state.phase === "done") {
      main.hidden = true;
      done.hidden = false;
      done.textContent =
        "all done — " +
        `${state.counts.accepted} accepted, ${state.counts.rejected} rejected this session`;
      this.stopTimer();
      return;
    }
    main.hidden = state.item === null;
    done.hidden = true;

    if (state.item !== null) {
      const original = this.el<HTMLImageElement>("img-original");
      const reconstructed = this.el<HTMLImageElement>("img-reconstructed");
      if (original.dataset.itemId !== state.item.item_id) {
        original.dataset.itemId = state.item.item_id;
        this.resetView();
        this.trackLoading(original, reconstructed, state.item.reconstructed_image_url);
        original.src = state.item.original_image_url;
        reconstructed.src = state.item.reconstructed_image_url ?? "";
        reconstructed.parentElement!.classList.toggle(
          "missing",
          state.item.reconstructed_image_url === null,
        );
        this.el("caption").textContent = state.item.caption;
        this.startTimer(state.itemShownAt);
      }
    }

    const busy = state.phase !== "reviewing" || !state.imagesLoaded;
    for (const id of ["accept", "reject-a", "reject-b", "reject-c"]) {
      this.el<HTMLButtonElement>(id).disabled = busy;
    }
  }

  /** Zoom/pan/blend actions from the keyboard map. */
  applyViewAction(action: KeyAction): void {
    if (action.kind === "zoom") {
      this.transform.scale = Math.min(8, Math.max(0.25, this.transform.scale * action.factor));
    } else if (action.kind === "pan") {
      this.transform.x += action.dx;
      this.transform.y += action.dy;
    } else if (action.kind === "reset-view") {
      this.resetView();
    } else if (action.kind === "toggle-blend") {
      this.blend = !this.blend;
      this.root.classList.toggle("blend", this.blend);
    }
    this.applyTransform();
  }

  private trackLoading(
    original: HTMLImageElement,
    reconstructed: HTMLImageElement,
    reconstructedUrl: string | null,
  ): void {
    let remaining = reconstructedUrl === null ? 1 : 2;
    const arm = (img: HTMLImageElement) => {
      img.onload = () => {
        remaining -= 1;
        if (remaining === 0) this.onImagesReady();
      };
      img.onerror = () => {
        // A missing image still unblocks the verdict: the lease TTL covers skips.
        remaining -= 1;
        img.parentElement!.classList.add("missing");
        if (remaining === 0) this.onImagesReady();
      };
    };
    arm(original);
    if (reconstructedUrl !== null) arm(reconstructed);
  }

  private applyTransform(): void {
    const { scale, x, y } = this.transform;
    for (const id of ["img-original", "img-reconstructed"]) {
      this.el(id).style.transform = `translate(${x}px, ${y}px) scale(${scale})`;
    }
  }

  private resetView(): void {
    this.transform.scale = 1;
    this.transform.x = 0;
    this.transform.y = 0;
    this.applyTransform();
  }

  private startTimer(shownAt: number | null): void {
    this.stopTimer();
    if (shownAt === null) return;
    const tick = () => {
      this.el("elapsed").textContent = `elapsed: ${((Date.now() - shownAt) / 1000).toFixed(0)}s`;
    };
    tick();
    this.timer = window.setInterval(tick, 1000);
  }

  private stopTimer(): void {
    if (this.timer !== undefined) {
      window.clearInterval(this.timer);
      this.timer = undefined;
    }
  }

  private el<T extends HTMLElement = HTMLElement>(id: string): T {
    return this.root.querySelector<T>(`#${id}`)!;
  }
}
