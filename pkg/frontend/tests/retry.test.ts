import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { RetryQueue } from "../src/retry.js";
import type { DecisionBody, DecisionResponse } from "../src/types.js";

const body = (ref: string): DecisionBody => ({ ref_id: ref, decision: "include" });

const ok: DecisionResponse = { decision_id: "d1", status: "include" };

describe("RetryQueue", () => {
  it("flushes queued decisions in order without loss", async () => {
    const sent: string[] = [];
    const queue = new RetryQueue(async (b) => {
      sent.push(b.ref_id);
      return ok;
    });
    queue.enqueue(body("000001"));
    queue.enqueue(body("000002"));
    queue.enqueue(body("000003"));
    expect(queue.size).toBe(3);
    expect(queue.unsynced()).toEqual(["000001", "000002", "000003"]);

    const delivered = await queue.flush();
    expect(delivered).toBe(3);
    expect(sent).toEqual(["000001", "000002", "000003"]);
    expect(queue.size).toBe(0);
  });

  it("stops at the first network failure and keeps the remainder", async () => {
    let failing = true;
    const sent: string[] = [];
    const queue = new RetryQueue(async (b) => {
      if (failing && b.ref_id === "000002") throw new TypeError("fetch failed");
      sent.push(b.ref_id);
      return ok;
    });
    queue.enqueue(body("000001"));
    queue.enqueue(body("000002"));
    queue.enqueue(body("000003"));

    expect(await queue.flush()).toBe(1);
    expect(queue.unsynced()).toEqual(["000002", "000003"]);

    failing = false;
    expect(await queue.flush()).toBe(2);
    expect(sent).toEqual(["000001", "000002", "000003"]);
    expect(queue.size).toBe(0);
  });

  it("evicts decisions the server rejected instead of retrying them forever", async () => {
    const rejected: string[] = [];
    const sent: string[] = [];
    const queue = new RetryQueue(
      async (b) => {
        if (b.ref_id === "bogus") throw new ApiError(404, "unknown ref_id 'bogus'");
        sent.push(b.ref_id);
        return ok;
      },
      () => {},
      (b) => rejected.push(b.ref_id),
    );
    queue.enqueue(body("bogus"));
    queue.enqueue(body("000002"));

    expect(await queue.flush()).toBe(1);
    expect(rejected).toEqual(["bogus"]);
    expect(sent).toEqual(["000002"]);
    expect(queue.size).toBe(0);
  });

  it("shares a flush already in progress instead of doubling posts", async () => {
    let release: (() => void) | null = null;
    const posts: string[] = [];
    const queue = new RetryQueue(async (b) => {
      posts.push(b.ref_id);
      if (release === null) {
        await new Promise<void>((resolve) => {
          release = resolve;
        });
      }
      return ok;
    });
    queue.enqueue(body("000001"));
    queue.enqueue(body("000002"));

    const first = queue.flush();
    const second = queue.flush();
    expect(second).toBe(first);
    release!();
    expect(await first).toBe(2);
    expect(posts).toEqual(["000001", "000002"]);
  });

  it("reports size changes through onChange", async () => {
    const sizes: number[] = [];
    const queue = new RetryQueue(async () => ok, (n) => sizes.push(n));
    queue.enqueue(body("000001"));
    queue.enqueue(body("000002"));
    await queue.flush();
    expect(sizes).toEqual([1, 2, 1, 0]);
  });
});
