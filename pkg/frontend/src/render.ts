/** DOM builders. Every function here paints into a container it is handed;
none of them keep state or talk to the network. */

import { clipSpans, segmentSpans, type Segment } from "./highlight.js";
import type {
  ConflictRow,
  ExecutionRow,
  HighlightSpan,
  JudgmentSummary,
  PreviewResponse,
  RecordPayload,
  StoppingState,
} from "./types.js";

/** The string highlight and evidence offsets index into: title and abstract
joined by one space, bare title when the abstract is empty. Must match the
text the server computed spans against. */
export function displayText(item: RecordPayload): string {
  return item.abstract ? `${item.title} ${item.abstract}` : item.title;
}

export type SpanWarning = (span: HighlightSpan) => void;

function segmentNode(segment: Segment): Node {
  if (segment.kinds.length === 0) {
    return document.createTextNode(segment.text);
  }
  const mark = document.createElement("mark");
  mark.className = segment.kinds.map((kind) => `hl-${kind}`).join(" ");
  mark.textContent = segment.text;
  return mark;
}

export function renderSegments(
  container: HTMLElement,
  text: string,
  spans: HighlightSpan[],
  warn: SpanWarning,
): void {
  container.textContent = "";
  for (const segment of segmentSpans(text, spans, warn)) {
    container.append(segmentNode(segment));
  }
}

function badge(text: string, className: string): HTMLElement {
  const el = document.createElement("span");
  el.className = `badge ${className}`;
  el.textContent = text;
  return el;
}

function metaLine(item: RecordPayload): string {
  const parts: string[] = [];
  if (item.authors.length > 0) {
    const lead = item.authors[0];
    parts.push(item.authors.length > 1 ? `${lead} et al.` : lead);
  }
  if (item.year) parts.push(item.year);
  if (item.journal) parts.push(item.journal);
  if (item.doi) parts.push(`doi:${item.doi}`);
  if (item.screening_set) parts.push(item.screening_set);
  return parts.join(" · ");
}

/**
 * Paint one record: badges, title and abstract with layered keyword and
 * evidence marks, and the judgment panel when a model has seen this record.
 * Evidence spans with unusable offsets still show up as quotes; they just
 * get no overlay.
 */
export function renderRecord(
  root: HTMLElement,
  item: RecordPayload,
  judgment: JudgmentSummary | null,
  unsynced: boolean,
  warn: SpanWarning,
): void {
  root.textContent = "";
  root.dataset.refId = item.ref_id;

  const text = displayText(item);
  const raw: HighlightSpan[] = [...item.highlights];
  if (judgment) {
    for (const ev of judgment.evidence) {
      if (ev.valid_offsets) {
        raw.push({ start: ev.start, end: ev.end, kind: "evidence" });
      }
    }
  }
  // bad offsets are reported here, against the full display text, because
  // clipping into title and abstract would silently swallow them
  const spans: HighlightSpan[] = [];
  for (const span of raw) {
    if (span.start < 0 || span.end > text.length || span.start >= span.end) {
      warn(span);
      continue;
    }
    spans.push(span);
  }

  const badges = document.createElement("div");
  badges.className = "badges";
  badges.append(badge(item.ref_id, "badge-id"));
  badges.append(badge(item.status, `badge-status status-${item.status}`));
  if (typeof item.score === "number") {
    badges.append(badge(`model ${item.score.toFixed(3)}`, "badge-score"));
  }
  if (judgment) {
    const prob = badge(`llm ${judgment.probability.toFixed(2)}`, "badge-llm");
    prob.dataset.probability = String(judgment.probability);
    badges.append(prob);
  }
  if (unsynced) {
    badges.append(badge("unsynced", "badge-unsynced"));
  }
  root.append(badges);

  const title = document.createElement("h2");
  title.className = "rec-title";
  renderSegments(title, item.title, clipSpans(spans, 0, item.title.length), warn);
  root.append(title);

  const meta = document.createElement("p");
  meta.className = "rec-meta";
  meta.textContent = metaLine(item);
  root.append(meta);

  if (item.abstract) {
    const abstract = document.createElement("p");
    abstract.className = "rec-abstract";
    const start = item.title.length + 1; // skip the joining space
    renderSegments(abstract, item.abstract, clipSpans(spans, start, text.length), warn);
    root.append(abstract);
  }

  if (judgment) {
    root.append(renderJudgment(judgment));
  }
}

function renderJudgment(judgment: JudgmentSummary): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "judgment";

  const head = document.createElement("p");
  head.className = "judgment-head";
  head.textContent =
    `${judgment.execution_id}${judgment.active ? " (active)" : ""}` +
    ` · p=${judgment.probability.toFixed(2)}`;
  panel.append(head);

  if (judgment.reasons.length > 0) {
    const reasons = document.createElement("ul");
    reasons.className = "judgment-reasons";
    for (const reason of judgment.reasons) {
      const li = document.createElement("li");
      li.textContent = reason;
      reasons.append(li);
    }
    panel.append(reasons);
  }

  if (judgment.evidence.length > 0) {
    const quotes = document.createElement("ul");
    quotes.className = "judgment-quotes";
    for (const ev of judgment.evidence) {
      const li = document.createElement("li");
      li.textContent = ev.valid_offsets ? `“${ev.quote}”` : `“${ev.quote}” (not located)`;
      quotes.append(li);
    }
    panel.append(quotes);
  }
  return panel;
}

export function renderQueueList(
  list: HTMLElement,
  items: RecordPayload[],
  cursor: number,
  onSelect: (index: number) => void,
): void {
  list.textContent = "";
  items.forEach((item, index) => {
    const li = document.createElement("li");
    li.className = index === cursor ? "queue-item current" : "queue-item";
    li.dataset.refId = item.ref_id;
    const label = document.createElement("span");
    label.className = "queue-title";
    label.textContent = item.title;
    const status = document.createElement("span");
    status.className = `queue-status status-${item.status}`;
    status.textContent = typeof item.score === "number"
      ? `${item.status} ${item.score.toFixed(2)}`
      : item.status;
    li.append(label, status);
    li.addEventListener("click", () => onSelect(index));
    list.append(li);
  });
}

export function renderStopping(el: HTMLElement, s: StoppingState): void {
  const advice = s.stop_recommended ? "stop suggested" : "keep screening";
  el.textContent =
    `${s.rule}: ${s.screened}/${s.total_records} screened, ` +
    `${s.relevant_found} relevant, run ${s.trailing_run}, ` +
    `p=${s.p_value.toFixed(4)} · ${advice}`;
  el.classList.toggle("stop-now", s.stop_recommended);
}

export function renderExecutions(
  tbody: HTMLElement,
  rows: ExecutionRow[],
  selectedId: string | null,
  onSelect: (id: string) => void,
): void {
  tbody.textContent = "";
  for (const row of rows) {
    if (row.execution_type !== "batch_screening") continue;
    const tr = document.createElement("tr");
    tr.className = row.execution_id === selectedId ? "exec-row selected" : "exec-row";
    tr.dataset.executionId = row.execution_id;
    const cells = [
      row.execution_id,
      row.model_name,
      String(row.targeted_count),
      `${row.included_count}/${row.excluded_count}`,
      row.threshold.toFixed(2),
      row.confirmation_status + (row.active ? " ●" : ""),
    ];
    for (const value of cells) {
      const td = document.createElement("td");
      td.textContent = value;
      tr.append(td);
    }
    tr.addEventListener("click", () => onSelect(row.execution_id));
    tbody.append(tr);
  }
}

export function renderPreviewCounts(el: HTMLElement, p: PreviewResponse): void {
  el.dataset.include = String(p.would_include);
  el.dataset.exclude = String(p.would_exclude);
  el.textContent =
    `at ${p.threshold.toFixed(2)}: ${p.would_include} in / ${p.would_exclude} out`;
}

export function renderConflicts(el: HTMLElement, rows: ConflictRow[]): void {
  el.textContent = "";
  if (rows.length === 0) {
    el.textContent = "no conflicts";
    return;
  }
  for (const row of rows) {
    const div = document.createElement("div");
    div.className = "conflict-row";
    const votes = row.votes
      .map((v) => `${v.reviewer_id}: ${v.decision}`)
      .join(", ");
    div.textContent = `${row.ref_id}: ${votes}`;
    el.append(div);
  }
}
