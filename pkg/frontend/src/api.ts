/** Thin fetch client for the screening service.

All screening state lives server side; this module only shapes requests and
decodes JSON. Server-reported errors become ApiError so callers can tell a
rejected request (the server answered) from a network failure (it did not).
*/

import type {
  ConfirmResponse,
  ConflictsResponse,
  DecisionBody,
  DecisionResponse,
  ExecutionsResponse,
  HealthResponse,
  JudgmentsResponse,
  PreviewResponse,
  QueueResponse,
  RecordsResponse,
  Status,
  StoppingState,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  /** Sent as the x-reviewer header when non-empty. */
  reviewer = "";

  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["content-type"] = "application/json";
    if (this.reviewer) h["x-reviewer"] = this.reviewer;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) {
      let message = `request failed with status ${res.status}`;
      try {
        const body: unknown = await res.json();
        if (
          typeof body === "object" && body !== null &&
          typeof (body as { error?: unknown }).error === "string"
        ) {
          message = (body as { error: string }).error;
        }
      } catch {
        // non-JSON error body, keep the generic message
      }
      throw new ApiError(res.status, message);
    }
    return (await res.json()) as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>(path, { headers: this.headers(false) });
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthResponse> {
    return this.get("/api/health");
  }

  queue(mode: "manual" | "ml", limit = 200): Promise<QueueResponse> {
    return this.get(`/api/queue?mode=${mode}&limit=${limit}`);
  }

  records(status?: Status): Promise<RecordsResponse> {
    const suffix = status ? `?status=${status}` : "";
    return this.get(`/api/records${suffix}`);
  }

  postDecision(body: DecisionBody): Promise<DecisionResponse> {
    return this.post("/api/decisions", body);
  }

  conflicts(): Promise<ConflictsResponse> {
    return this.get("/api/conflicts");
  }

  stopping(): Promise<StoppingState> {
    return this.get("/api/stopping");
  }

  executions(): Promise<ExecutionsResponse> {
    return this.get("/api/llm/executions");
  }

  judgments(refId: string): Promise<JudgmentsResponse> {
    return this.get(`/api/llm/judgments/${encodeURIComponent(refId)}`);
  }

  preview(executionId: string, t: number): Promise<PreviewResponse> {
    const exec = encodeURIComponent(executionId);
    return this.get(`/api/llm/threshold-preview?execution=${exec}&t=${t}`);
  }

  confirm(executionId: string, t: number): Promise<ConfirmResponse> {
    return this.post("/api/llm/confirm", { execution_id: executionId, threshold: t });
  }
}
