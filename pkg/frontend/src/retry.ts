import { ApiError } from "./api.js";
import type { DecisionBody, DecisionResponse } from "./types.js";

export type PostDecision = (body: DecisionBody) => Promise<DecisionResponse>;

/**
 * Holding pen for decisions that could not reach the server.
 *
 * Order is preserved and a flush stops at the first network failure, so
 * nothing is dropped or reordered; whatever remains goes out on the next
 * flush. A flush already in progress is shared, never doubled. Posts the
 * server actively rejects (it answered, with an error) leave the queue
 * through onRejected instead of retrying forever.
 */
export class RetryQueue {
  private pending: DecisionBody[] = [];
  private flushing: Promise<number> | null = null;

  constructor(
    private readonly post: PostDecision,
    private readonly onChange: (size: number) => void = () => {},
    private readonly onRejected: (body: DecisionBody, error: ApiError) => void = () => {},
  ) {}

  get size(): number {
    return this.pending.length;
  }

  /** ref_ids with an undelivered decision, oldest first. */
  unsynced(): string[] {
    return this.pending.map((body) => body.ref_id);
  }

  enqueue(body: DecisionBody): void {
    this.pending.push(body);
    this.onChange(this.size);
  }

  /** Retry queued posts in order; resolves with how many were delivered. */
  flush(): Promise<number> {
    if (this.flushing) return this.flushing;
    this.flushing = this.drain().finally(() => {
      this.flushing = null;
    });
    return this.flushing;
  }

  private async drain(): Promise<number> {
    let delivered = 0;
    while (this.pending.length > 0) {
      const head = this.pending[0];
      try {
        await this.post(head);
      } catch (error) {
        if (error instanceof ApiError) {
          // the server saw it and said no; retrying cannot change that
          this.pending.shift();
          this.onChange(this.size);
          this.onRejected(head, error);
          continue;
        }
        break; // still offline, keep the rest for later
      }
      this.pending.shift();
      delivered++;
      this.onChange(this.size);
    }
    return delivered;
  }
}
