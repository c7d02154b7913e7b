/** The annotation screen: fetch a task, capture two eye clicks, submit,
 * preview the processed chip, advance.
 *
 * All DOM is built under the mount point, so tests can drive the app with
 * synthetic mouse and keyboard events and read state back out of the tree.
 */

import { AnnotationApi, ApiError, SubmitResult, TaskInfo } from "./api.js";
import {
  ClickState,
  addClick,
  canSubmit,
  emptyState,
  fitScale,
  reset,
  toOriginal,
  undo,
} from "./clicks.js";

export interface AppOptions {
  /** Server origin; empty string means same-origin. */
  baseUrl?: string;
  /** Annotator id sent with every lease and submission. */
  client?: string;
  /** Fixed fit target for the image; defaults to the stage's own size.
   * Tests pass this because headless DOM has no layout. */
  viewport?: { width: number; height: number };
  fetchFn?: (input: string, init?: RequestInit) => Promise<Response>;
}

const PROMPTS = [
  "Click the subject's RIGHT eye (left side of the photo).",
  "Click the subject's LEFT eye (right side of the photo).",
  "Press Enter or Submit.",
];

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  id?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (id) node.id = id;
  if (className) node.className = className;
  return node;
}

export class AnnotateApp {
  readonly api: AnnotationApi;

  private readonly doc: Document;
  private state: ClickState = emptyState(1);
  private task: TaskInfo | null = null;
  private result: SubmitResult | null = null;
  private busy = false;
  private pending: Promise<void> = Promise.resolve();
  private retryAction: (() => Promise<void>) | null = null;
  private readonly viewport: { width: number; height: number } | null;

  private prompt!: HTMLElement;
  private progressLine!: HTMLElement;
  private banner!: HTMLElement;
  private bannerText!: HTMLElement;
  private bannerRetry!: HTMLButtonElement;
  private stage!: HTMLElement;
  private wrap!: HTMLElement;
  private img!: HTMLImageElement;
  private markerLayer!: HTMLElement;
  private resultPanel!: HTMLElement;
  private resultTitle!: HTMLElement;
  private resultDetail!: HTMLElement;
  private preview!: HTMLImageElement;
  private nextBtn!: HTMLButtonElement;
  private doneScreen!: HTMLElement;
  private doneCounts!: HTMLElement;
  private refreshBtn!: HTMLButtonElement;
  private undoBtn!: HTMLButtonElement;
  private resetBtn!: HTMLButtonElement;
  private submitBtn!: HTMLButtonElement;

  private readonly keyHandler = (ev: KeyboardEvent) => this.handleKey(ev);

  constructor(
    private readonly root: HTMLElement,
    opts: AppOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.viewport = opts.viewport ?? null;
    const client = opts.client ?? `annotator-${Math.random().toString(36).slice(2, 10)}`;
    this.api = new AnnotationApi(opts.baseUrl ?? "", client, opts.fetchFn);
    this.buildDom();
    this.doc.addEventListener("keydown", this.keyHandler);
  }

  destroy(): void {
    this.doc.removeEventListener("keydown", this.keyHandler);
    this.root.replaceChildren();
  }

  /** Resolves when every handler kicked off so far has finished. */
  async settled(): Promise<void> {
    await this.pending;
  }

  get currentTask(): TaskInfo | null {
    return this.task;
  }

  get lastResult(): SubmitResult | null {
    return this.result;
  }

  get clickCount(): number {
    return this.state.points.length;
  }

  async start(): Promise<void> {
    await this.refreshProgress();
    await this.loadNext();
  }

  // -- DOM scaffolding -------------------------------------------------

  private buildDom(): void {
    const d = this.doc;
    this.root.replaceChildren();

    const header = el(d, "header", undefined, "topbar");
    this.progressLine = el(d, "span", "progress-line");
    this.prompt = el(d, "span", "prompt");
    header.append(this.progressLine, this.prompt);

    this.banner = el(d, "div", "banner", "banner");
    this.banner.hidden = true;
    this.bannerText = el(d, "span", "banner-text");
    this.bannerRetry = el(d, "button", "banner-retry");
    this.bannerRetry.textContent = "retry";
    this.bannerRetry.addEventListener("click", () => {
      const action = this.retryAction;
      this.hideBanner();
      if (action) this.track(action());
    });
    this.banner.append(this.bannerText, this.bannerRetry);

    this.stage = el(d, "main", "stage");
    this.wrap = el(d, "div", "image-wrap");
    this.img = el(d, "img", "photo");
    this.img.alt = "portrait awaiting eye annotation";
    this.img.draggable = false;
    this.markerLayer = el(d, "div", "marker-layer");
    this.wrap.append(this.img, this.markerLayer);
    this.wrap.addEventListener("click", (ev) => this.handleImageClick(ev));

    this.resultPanel = el(d, "aside", "result-panel");
    this.resultPanel.hidden = true;
    this.resultTitle = el(d, "h2", "result-title");
    this.preview = el(d, "img", "preview");
    this.preview.alt = "processed 60x70 chip";
    this.resultDetail = el(d, "p", "result-detail");
    this.nextBtn = el(d, "button", "next-btn");
    this.nextBtn.textContent = "next (Enter)";
    this.nextBtn.addEventListener("click", () => this.track(this.loadNext()));
    this.resultPanel.append(this.resultTitle, this.preview, this.resultDetail, this.nextBtn);

    this.doneScreen = el(d, "div", "done-screen");
    this.doneScreen.hidden = true;
    const doneTitle = el(d, "h2");
    doneTitle.textContent = "queue drained";
    this.doneCounts = el(d, "p", "done-counts");
    this.refreshBtn = el(d, "button", "refresh-btn");
    this.refreshBtn.textContent = "check again";
    this.refreshBtn.addEventListener("click", () => this.track(this.loadNext()));
    this.doneScreen.append(doneTitle, this.doneCounts, this.refreshBtn);

    this.stage.append(this.wrap, this.resultPanel, this.doneScreen);

    const controls = el(d, "footer", undefined, "controls");
    this.undoBtn = el(d, "button", "undo-btn");
    this.undoBtn.textContent = "undo (u)";
    this.undoBtn.addEventListener("click", () => this.applyUndo());
    this.resetBtn = el(d, "button", "reset-btn");
    this.resetBtn.textContent = "reset";
    this.resetBtn.addEventListener("click", () => this.applyReset());
    this.submitBtn = el(d, "button", "submit-btn");
    this.submitBtn.textContent = "submit (Enter)";
    this.submitBtn.addEventListener("click", () => this.track(this.submitClicks()));
    controls.append(this.undoBtn, this.resetBtn, this.submitBtn);

    this.root.append(header, this.banner, this.stage, controls);
    this.renderClicks();
  }

  // -- task flow -------------------------------------------------------

  async loadNext(): Promise<void> {
    this.result = null;
    this.resultPanel.hidden = true;
    this.preview.removeAttribute("src");
    this.hideBanner();
    let task: TaskInfo | null;
    try {
      task = await this.api.nextTask();
    } catch (err) {
      this.task = null;
      this.showBanner(describe(err), () => this.loadNext());
      return;
    }
    this.task = task;
    if (!task) {
      this.wrap.hidden = true;
      this.doneScreen.hidden = false;
      this.prompt.textContent = "nothing left to annotate";
      await this.refreshProgress();
      return;
    }
    this.doneScreen.hidden = true;
    this.wrap.hidden = false;

    const view = this.viewport ?? this.measureViewport();
    const scale = fitScale(task.width, task.height, view.width, view.height);
    this.state = emptyState(scale);
    // fractional CSS pixels are valid, and rounding here would skew the
    // click-to-original conversion below
    this.img.style.width = `${task.width * scale}px`;
    this.img.style.height = `${task.height * scale}px`;
    this.img.src = this.api.imageUrl(task, "png");
    this.renderClicks();
  }

  private measureViewport(): { width: number; height: number } {
    const rect = this.stage.getBoundingClientRect();
    if (rect.width > 0 && rect.height > 0) {
      return { width: rect.width, height: rect.height };
    }
    const win = this.doc.defaultView;
    return { width: win?.innerWidth ?? 800, height: (win?.innerHeight ?? 600) - 120 };
  }

  private handleImageClick(ev: MouseEvent): void {
    if (!this.task || this.busy || !this.resultPanel.hidden) {
      return;
    }
    const rect = this.img.getBoundingClientRect();
    const p = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    this.state = addClick(this.state, p);
    this.renderClicks();
  }

  private applyUndo(): void {
    if (this.busy) return;
    this.state = undo(this.state);
    this.renderClicks();
  }

  private applyReset(): void {
    if (this.busy) return;
    this.state = reset(this.state);
    this.renderClicks();
  }

  async submitClicks(): Promise<void> {
    if (!this.task || this.busy || !canSubmit(this.state)) {
      return;
    }
    this.busy = true;
    this.submitBtn.disabled = true;
    try {
      const { left, right } = toOriginal(this.state);
      const res = await this.api.submit(this.task.id, left, right);
      this.result = res;
      this.state = reset(this.state); // spent; disables re-submission of the same pair
      this.showResult(res);
      await this.refreshProgress();
    } catch (err) {
      if (err instanceof ApiError && err.isStaleLease) {
        this.showBanner("lease expired; the task went back to the queue — fetching a fresh one", null);
        await this.loadNext();
      } else if (err instanceof ApiError && err.status === 422) {
        this.showBanner(`rejected: ${err.message} — click both eyes again`, null);
        this.state = reset(this.state);
        this.renderClicks();
      } else {
        this.showBanner(describe(err), () => this.submitClicks());
      }
    } finally {
      this.busy = false;
      this.renderClicks();
    }
  }

  private showResult(res: SubmitResult): void {
    const ok = res.record.outcome === "manual_success";
    this.resultTitle.textContent = ok ? "processed" : "still failed";
    if (res.previewPngBase64) {
      this.preview.src = `data:image/png;base64,${res.previewPngBase64}`;
      this.preview.hidden = false;
    } else {
      this.preview.hidden = true;
    }
    this.resultDetail.textContent = ok
      ? `saved to ${res.record.output}`
      : (res.record.error ?? `outcome: ${res.record.outcome}`);
    this.resultPanel.hidden = false;
    this.prompt.textContent = "Enter for the next image";
  }

  private async refreshProgress(): Promise<void> {
    try {
      const p = await this.api.progress();
      this.progressLine.textContent =
        `${p.pending} pending · ${p.leased} leased · ${p.done} done ` +
        `(${p.manual_success} ok, ${p.manual_failed} failed)`;
      this.doneCounts.textContent =
        `${p.done} annotated: ${p.manual_success} processed, ${p.manual_failed} still failing`;
    } catch {
      // progress display is advisory; never block the flow on it
    }
  }

  // -- rendering -------------------------------------------------------

  private renderClicks(): void {
    const n = this.state.points.length;
    if (this.task && this.resultPanel.hidden) {
      this.prompt.textContent = PROMPTS[n] ?? PROMPTS[2]!;
    }
    this.markerLayer.replaceChildren();
    this.state.points.forEach((p, i) => {
      const marker = el(this.doc, "div", undefined, "marker");
      marker.dataset.index = String(i);
      marker.style.left = `${p.x}px`;
      marker.style.top = `${p.y}px`;
      marker.title = i === 0 ? "subject right eye" : "subject left eye";
      this.markerLayer.append(marker);
    });
    this.undoBtn.disabled = n === 0 || this.busy;
    this.resetBtn.disabled = n === 0 || this.busy;
    this.submitBtn.disabled = !canSubmit(this.state) || this.busy;
  }

  private showBanner(message: string, retry: (() => Promise<void>) | null): void {
    this.bannerText.textContent = message;
    this.retryAction = retry;
    this.bannerRetry.hidden = retry === null;
    this.banner.hidden = false;
  }

  private hideBanner(): void {
    this.banner.hidden = true;
    this.retryAction = null;
  }

  private handleKey(ev: KeyboardEvent): void {
    if (ev.key === "u") {
      this.applyUndo();
    } else if (ev.key === "Enter") {
      if (!this.resultPanel.hidden) {
        this.track(this.loadNext());
      } else {
        this.track(this.submitClicks());
      }
    }
  }

  /** Chain handler work so settled() can await everything in flight. */
  private track(work: Promise<void>): void {
    this.pending = this.pending.then(() => work);
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.message} (${err.code})`;
  }
  return err instanceof Error ? `request failed: ${err.message}` : "request failed";
}

export function mountApp(root: HTMLElement, opts: AppOptions = {}): AnnotateApp {
  const app = new AnnotateApp(root, opts);
  void app.start();
  return app;
}
