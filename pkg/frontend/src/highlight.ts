import type { HighlightSpan, SpanKind } from "./types.js";

export interface Segment {
  text: string;
  /** Sorted, deduplicated kinds covering this slice; empty for plain text. */
  kinds: SpanKind[];
}

/**
 * Split text into contiguous segments carrying the span kinds that cover
 * them. Two guarantees the rendering relies on:
 *
 *   - concatenating every segment's text reproduces the input exactly;
 *   - a position is inside a segment listing kind K iff some valid span of
 *     kind K covers that position, so the marked region for a span [s, e)
 *     is exactly text.slice(s, e).
 *
 * Spans outside the text or inverted are dropped and reported through
 * onDropped. Rendering must never crash on a bad span.
 */
export function segmentSpans(
  text: string,
  spans: HighlightSpan[],
  onDropped: (span: HighlightSpan) => void = () => {},
): Segment[] {
  const valid: HighlightSpan[] = [];
  for (const span of spans) {
    if (span.start < 0 || span.end > text.length || span.start >= span.end) {
      onDropped(span);
      continue;
    }
    valid.push(span);
  }
  if (valid.length === 0) {
    return text ? [{ text, kinds: [] }] : [];
  }

  const cuts = new Set<number>([0, text.length]);
  for (const span of valid) {
    cuts.add(span.start);
    cuts.add(span.end);
  }
  const bounds = [...cuts].sort((a, b) => a - b);

  const segments: Segment[] = [];
  for (let i = 0; i + 1 < bounds.length; i++) {
    const lo = bounds[i];
    const hi = bounds[i + 1];
    const kinds = new Set<SpanKind>();
    for (const span of valid) {
      if (span.start <= lo && hi <= span.end) kinds.add(span.kind);
    }
    segments.push({ text: text.slice(lo, hi), kinds: [...kinds].sort() });
  }
  return segments;
}

/**
 * Intersect spans with the window [start, end) and rebase offsets so they
 * index into text.slice(start, end). Spans crossing the window edge are
 * clipped; spans outside it vanish.
 */
export function clipSpans(
  spans: HighlightSpan[],
  start: number,
  end: number,
): HighlightSpan[] {
  const out: HighlightSpan[] = [];
  for (const span of spans) {
    const lo = Math.max(span.start, start);
    const hi = Math.min(span.end, end);
    if (lo < hi) {
      out.push({ ...span, start: lo - start, end: hi - start });
    }
  }
  return out;
}
