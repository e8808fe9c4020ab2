import { describe, expect, it } from "vitest";

import { clipSpans, segmentSpans } from "../src/highlight.js";
import type { HighlightSpan, SpanKind } from "../src/types.js";

const span = (start: number, end: number, kind: SpanKind = "include"): HighlightSpan =>
  ({ start, end, kind });

// deterministic junk generator for the coverage property
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

describe("segmentSpans", () => {
  it("returns the whole text as one plain segment when there are no spans", () => {
    expect(segmentSpans("randomized trial", [])).toEqual([
      { text: "randomized trial", kinds: [] },
    ]);
  });

  it("returns nothing for empty text", () => {
    expect(segmentSpans("", [])).toEqual([]);
  });

  it("marks exactly the requested slice", () => {
    const text = "A randomized controlled trial of statins";
    const segments = segmentSpans(text, [span(2, 12)]);
    const marked = segments.filter((s) => s.kinds.length > 0);
    expect(marked).toHaveLength(1);
    expect(marked[0].text).toBe(text.slice(2, 12));
    expect(segments.map((s) => s.text).join("")).toBe(text);
  });

  it("layers overlapping kinds onto the shared slice", () => {
    const text = "placebo controlled";
    const segments = segmentSpans(text, [
      span(0, 7, "include"),
      span(4, 12, "evidence"),
    ]);
    expect(segments.map((s) => ({ t: s.text, k: s.kinds }))).toEqual([
      { t: "plac", k: ["include"] },
      { t: "ebo", k: ["evidence", "include"] },
      { t: " cont", k: ["evidence"] },
      { t: "rolled", k: [] },
    ]);
  });

  it("drops out-of-bounds and inverted spans, reporting each", () => {
    const dropped: HighlightSpan[] = [];
    const text = "short";
    const segments = segmentSpans(
      text,
      [span(-1, 3), span(2, 99), span(4, 4), span(3, 1), span(0, 2)],
      (s) => dropped.push(s),
    );
    expect(dropped).toHaveLength(4);
    expect(segments.map((s) => s.text).join("")).toBe(text);
    expect(segments[0]).toEqual({ text: "sh", kinds: ["include"] });
  });

  it("covers every position with exactly the kinds of the spans over it", () => {
    const rand = lcg(20260817);
    const kinds: SpanKind[] = ["include", "exclude", "evidence"];
    for (let round = 0; round < 200; round++) {
      const n = 1 + Math.floor(rand() * 60);
      const text = "x".repeat(n);
      const spans: HighlightSpan[] = [];
      const count = Math.floor(rand() * 6);
      for (let i = 0; i < count; i++) {
        const a = Math.floor(rand() * (n + 2)) - 1;
        const b = Math.floor(rand() * (n + 2)) - 1;
        spans.push(span(a, b, kinds[Math.floor(rand() * kinds.length)]));
      }
      const valid = spans.filter((s) => s.start >= 0 && s.end <= n && s.start < s.end);
      const segments = segmentSpans(text, spans);

      expect(segments.map((s) => s.text).join("")).toBe(text);
      let pos = 0;
      for (const seg of segments) {
        for (let p = pos; p < pos + seg.text.length; p++) {
          const expected = new Set(
            valid.filter((s) => s.start <= p && p < s.end).map((s) => s.kind));
          expect(new Set(seg.kinds)).toEqual(expected);
        }
        pos += seg.text.length;
      }
    }
  });
});

describe("clipSpans", () => {
  it("rebases spans into the window", () => {
    expect(clipSpans([span(10, 14)], 8, 20)).toEqual([span(2, 6)]);
  });

  it("clips spans crossing the window edges", () => {
    expect(clipSpans([span(0, 12)], 5, 10)).toEqual([span(0, 5)]);
    expect(clipSpans([span(8, 30)], 5, 10)).toEqual([span(3, 5)]);
  });

  it("discards spans entirely outside the window", () => {
    expect(clipSpans([span(0, 5), span(10, 12)], 5, 10)).toEqual([]);
  });
});
