import type { PreviewResponse } from "./types.js";

export type PreviewFetch = (executionId: string, t: number) => Promise<PreviewResponse>;

/**
 * Debounced, sequenced threshold preview.
 *
 * Dragging the slider fires a burst of input events; only the trailing
 * value goes out after delayMs of quiet. Responses can land out of order,
 * so every request takes a ticket and anything older than the newest
 * applied ticket is discarded. The counts shown on screen are therefore
 * always the server's answer to the latest threshold and never a local
 * computation.
 */
export class ThresholdPreview {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private ticket = 0;
  private applied = 0;

  constructor(
    private readonly fetchPreview: PreviewFetch,
    private readonly onCounts: (counts: PreviewResponse) => void,
    private readonly onError: (error: unknown) => void = () => {},
    private readonly delayMs = 150,
  ) {}

  /** Debounced entry point; call on every slider input event. */
  update(executionId: string, t: number): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.send(executionId, t);
    }, this.delayMs);
  }

  /** Immediate fetch, used for the initial paint. */
  async send(executionId: string, t: number): Promise<void> {
    const ticket = ++this.ticket;
    try {
      const counts = await this.fetchPreview(executionId, t);
      if (ticket <= this.applied) return; // a newer answer already landed
      this.applied = ticket;
      this.onCounts(counts);
    } catch (error) {
      if (ticket > this.applied) this.onError(error);
    }
  }
}
