/** Application wiring: one ApiClient, one ViewState, DOM event plumbing.

Design rules, in rough order of importance:

  - the server is the source of truth; counts and statuses shown on screen
    come from responses, never from local recomputation
  - decisions advance the cursor optimistically; a server rejection rolls
    the cursor back, a network failure parks the decision in the retry
    queue and keeps going
  - single UI thread: mutations run through one promise chain so a test
    (or a fast typist) cannot interleave two decision posts
*/

import { ApiClient, ApiError } from "./api.js";
import { bindShortcuts } from "./keyboard.js";
import {
  renderConflicts,
  renderExecutions,
  renderPreviewCounts,
  renderQueueList,
  renderRecord,
  renderStopping,
} from "./render.js";
import { RetryQueue } from "./retry.js";
import { ThresholdPreview } from "./slider.js";
import {
  advance,
  clampCursor,
  current,
  initialState,
  moveTo,
  parseFilter,
  parseMode,
  retreat,
  setItems,
  type Filter,
  type Mode,
  type ViewState,
} from "./state.js";
import type {
  DecisionBody,
  JudgmentSummary,
  RecordPayload,
  Verdict,
} from "./types.js";

interface Elements {
  banner: HTMLElement;
  health: HTMLElement;
  stopping: HTMLElement;
  unsynced: HTMLElement;
  filter: HTMLSelectElement;
  mode: HTMLSelectElement;
  reviewer: HTMLInputElement;
  queueList: HTMLElement;
  record: HTMLElement;
  execBody: HTMLElement;
  slider: HTMLInputElement;
  sliderValue: HTMLElement;
  previewCounts: HTMLElement;
  confirmBtn: HTMLButtonElement;
  conflicts: HTMLElement;
}

function el<T extends HTMLElement>(doc: Document, id: string): T {
  const found = doc.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

export class App {
  state: ViewState = initialState();
  readonly retry: RetryQueue;
  private readonly preview: ThresholdPreview;
  private readonly els: Elements;
  private judgment: JudgmentSummary | null = null;
  private judgmentTicket = 0;
  private ops: Promise<void> = Promise.resolve();
  private unsyncedRefs = new Set<string>();
  private unbindKeys: (() => void) | null = null;
  private onOnline: (() => void) | null = null;

  constructor(
    private readonly doc: Document,
    private readonly client: ApiClient,
    private readonly win: Window = doc.defaultView as Window,
  ) {
    this.els = {
      banner: el(doc, "banner"),
      health: el(doc, "health-chip"),
      stopping: el(doc, "stopping-chip"),
      unsynced: el(doc, "unsynced-chip"),
      filter: el<HTMLSelectElement>(doc, "filter-select"),
      mode: el<HTMLSelectElement>(doc, "mode-select"),
      reviewer: el<HTMLInputElement>(doc, "reviewer-input"),
      queueList: el(doc, "queue-list"),
      record: el(doc, "record-card"),
      execBody: el(doc, "exec-body"),
      slider: el<HTMLInputElement>(doc, "threshold-slider"),
      sliderValue: el(doc, "threshold-value"),
      previewCounts: el(doc, "preview-counts"),
      confirmBtn: el<HTMLButtonElement>(doc, "confirm-btn"),
      conflicts: el(doc, "conflicts-panel"),
    };
    this.retry = new RetryQueue(
      (body) => this.client.postDecision(body),
      () => this.paintUnsynced(),
      (body, error) => this.showError(`decision for ${body.ref_id} rejected: ${error.message}`),
    );
    this.preview = new ThresholdPreview(
      (id, t) => this.client.preview(id, t),
      (counts) => renderPreviewCounts(this.els.previewCounts, counts),
      (error) => this.showError(describe(error)),
    );
  }

  /** Wait for every queued mutation to settle; the test hook. */
  idle(): Promise<void> {
    return this.ops;
  }

  /** Detach window listeners so a discarded instance stays silent. */
  stop(): void {
    this.unbindKeys?.();
    this.unbindKeys = null;
    if (this.onOnline) {
      this.win.removeEventListener("online", this.onOnline);
      this.onOnline = null;
    }
  }

  private enqueue(work: () => Promise<void>): Promise<void> {
    this.ops = this.ops.then(work, work);
    return this.ops;
  }

  async start(): Promise<void> {
    const params = new URLSearchParams(this.win.location?.search ?? "");
    this.state.filter = parseFilter(params.get("filter"));
    this.state.mode = parseMode(params.get("mode"));
    this.els.filter.value = this.state.filter;
    this.els.mode.value = this.state.mode;

    this.els.filter.addEventListener("change", () => {
      void this.enqueue(() => this.setFilter(this.els.filter.value as Filter));
    });
    this.els.mode.addEventListener("change", () => {
      void this.enqueue(() => this.setMode(this.els.mode.value as Mode));
    });
    this.els.reviewer.addEventListener("change", () => {
      this.client.reviewer = this.els.reviewer.value.trim();
      void this.enqueue(() => this.reload());
    });
    this.els.slider.addEventListener("input", () => {
      const t = Number(this.els.slider.value);
      this.state.threshold = t;
      this.els.sliderValue.textContent = t.toFixed(2);
      if (this.state.executionId) this.preview.update(this.state.executionId, t);
    });
    this.els.confirmBtn.addEventListener("click", () => {
      void this.enqueue(() => this.confirmThreshold());
    });
    this.onOnline = () => {
      void this.enqueue(() => this.flushRetries());
    };
    this.win.addEventListener("online", this.onOnline);

    this.unbindKeys = bindShortcuts(this.win, {
      include: () => void this.enqueue(() => this.decide("include")),
      exclude: () => void this.enqueue(() => this.decide("exclude")),
      maybe: () => void this.enqueue(() => this.decide("maybe")),
      next: () => void this.enqueue(() => this.step(+1)),
      prev: () => void this.enqueue(() => this.step(-1)),
    });

    await this.enqueue(() => this.reload());
  }

  private async reload(): Promise<void> {
    try {
      const health = await this.client.health();
      this.els.health.textContent = `${health.records} records`;
      await this.loadItems();
      await this.refreshStopping();
      await this.refreshExecutions();
      await this.refreshConflicts();
      this.clearError();
    } catch (error) {
      this.showError(describe(error));
    }
    this.paintAll();
  }

  private async loadItems(): Promise<void> {
    const { filter, mode } = this.state;
    let items: RecordPayload[];
    if (filter === "pending") {
      const res = await this.client.queue(mode);
      items = res.queue;
      this.banner(res.cold_start
        ? "model is cold: need at least one include and one exclude, showing import order"
        : "");
    } else if (filter === "all") {
      items = (await this.client.records()).records;
    } else {
      items = (await this.client.records(filter)).records;
    }
    this.state = setItems(this.state, items);
    await this.refreshJudgment();
  }

  private async setFilter(filter: Filter): Promise<void> {
    this.state = clampCursor({ ...this.state, filter, cursor: 0 });
    this.syncQuery();
    await this.loadItems();
    this.paintAll();
  }

  private async setMode(mode: Mode): Promise<void> {
    this.state = clampCursor({ ...this.state, mode, cursor: 0 });
    this.syncQuery();
    await this.loadItems();
    this.paintAll();
  }

  private syncQuery(): void {
    try {
      const url = `?filter=${this.state.filter}&mode=${this.state.mode}`;
      this.win.history?.replaceState?.(null, "", url);
    } catch {
      // history may be unavailable in embedded contexts; the UI works without it
    }
  }

  /** Post a decision for the focused record, then move on. */
  private async decide(verdict: Verdict): Promise<void> {
    const item = current(this.state);
    if (!item) return;
    const body: DecisionBody = { ref_id: item.ref_id, decision: verdict };
    const before = this.state.cursor;
    const moved = advance(this.state);
    this.state = moved.state;
    try {
      const res = await this.client.postDecision(body);
      item.status = res.status;
    } catch (error) {
      if (error instanceof ApiError) {
        // the server refused it; undo the optimistic move and surface why
        this.state = moveTo(this.state, before);
        this.showError(error.message);
        this.paintAll();
        return;
      }
      // network down: park it for retry and let screening continue
      this.retry.enqueue(body);
      this.unsyncedRefs.add(item.ref_id);
    }
    if (moved.refetch) {
      this.state = moveTo(this.state, 0);
      await this.loadItems();
    } else {
      await this.refreshJudgment();
    }
    await this.refreshStopping();
    this.paintAll();
  }

  private async step(delta: number): Promise<void> {
    this.state = delta > 0 ? advance(this.state).state : retreat(this.state);
    await this.refreshJudgment();
    this.paintAll();
  }

  private async flushRetries(): Promise<void> {
    const delivered = await this.retry.flush();
    const still = new Set(this.retry.unsynced());
    for (const ref of [...this.unsyncedRefs]) {
      if (!still.has(ref)) this.unsyncedRefs.delete(ref);
    }
    if (delivered > 0) {
      this.banner(`synced ${delivered} queued decision${delivered === 1 ? "" : "s"}`);
      await this.loadItems();
      await this.refreshStopping();
    }
    this.paintAll();
  }

  private async confirmThreshold(): Promise<void> {
    const id = this.state.executionId;
    if (!id) return;
    try {
      const res = await this.client.confirm(id, this.state.threshold);
      this.banner(
        `${res.execution_id} confirmed at ${res.threshold.toFixed(2)}: ` +
        `${res.included_count} included, ${res.excluded_count} excluded`);
      await this.loadItems();
      await this.refreshExecutions();
      await this.refreshStopping();
    } catch (error) {
      this.showError(describe(error));
    }
    this.paintAll();
  }

  private async refreshStopping(): Promise<void> {
    try {
      renderStopping(this.els.stopping, await this.client.stopping());
    } catch (error) {
      this.showError(describe(error));
    }
  }

  private async refreshExecutions(): Promise<void> {
    const res = await this.client.executions();
    if (res.batch_error) this.showError(res.batch_error);
    const screenings = res.executions.filter(
      (e) => e.execution_type === "batch_screening");
    if (!this.state.executionId && screenings.length > 0) {
      const active = screenings.find((e) => e.active);
      const pick = active ?? screenings[screenings.length - 1];
      this.state.executionId = pick.execution_id;
      this.state.threshold = pick.threshold;
      this.els.slider.value = String(pick.threshold);
      this.els.sliderValue.textContent = pick.threshold.toFixed(2);
    }
    renderExecutions(this.els.execBody, res.executions, this.state.executionId,
      (id) => void this.enqueue(() => this.selectExecution(id)));
    if (this.state.executionId) {
      await this.preview.send(this.state.executionId, this.state.threshold);
    }
  }

  private async selectExecution(id: string): Promise<void> {
    this.state.executionId = id;
    await this.refreshExecutions();
    await this.refreshJudgment();
    this.paintAll();
  }

  private async refreshConflicts(): Promise<void> {
    renderConflicts(this.els.conflicts, (await this.client.conflicts()).conflicts);
  }

  /** Fetch the focused record's judgment; staleness guarded by ticket. */
  private async refreshJudgment(): Promise<void> {
    const item = current(this.state);
    const ticket = ++this.judgmentTicket;
    let judgment: JudgmentSummary | null = null;
    if (item) {
      try {
        const res = await this.client.judgments(item.ref_id);
        judgment =
          res.judgments.find((j) => j.execution_id === this.state.executionId) ??
          res.judgments.find((j) => j.active) ??
          res.judgments[res.judgments.length - 1] ??
          null;
      } catch {
        judgment = null; // no judgments is a normal state, not an error
      }
    }
    if (ticket === this.judgmentTicket) this.judgment = judgment;
  }

  private paintAll(): void {
    const item = current(this.state);
    renderQueueList(this.els.queueList, this.state.items, this.state.cursor,
      (index) => void this.enqueue(async () => {
        this.state = moveTo(this.state, index);
        await this.refreshJudgment();
        this.paintAll();
      }));
    if (item) {
      renderRecord(this.els.record, item, this.judgment,
        this.unsyncedRefs.has(item.ref_id),
        (span) => console.warn("dropped out-of-bounds span", span));
    } else {
      this.els.record.textContent = "nothing to screen under this filter";
      delete this.els.record.dataset.refId;
    }
    this.paintUnsynced();
  }

  private paintUnsynced(): void {
    const size = this.retry.size;
    this.els.unsynced.textContent = size > 0 ? `${size} unsynced` : "";
    this.els.unsynced.classList.toggle("active", size > 0);
  }

  private banner(message: string): void {
    this.els.banner.textContent = message;
    this.els.banner.classList.remove("error");
  }

  private showError(message: string): void {
    this.els.banner.textContent = message;
    this.els.banner.classList.add("error");
  }

  private clearError(): void {
    if (this.els.banner.classList.contains("error")) {
      this.els.banner.textContent = "";
      this.els.banner.classList.remove("error");
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  if (error instanceof Error) return `network trouble: ${error.message}`;
  return String(error);
}

export async function createApp(doc: Document, client: ApiClient): Promise<App> {
  const app = new App(doc, client);
  await app.start();
  return app;
}
