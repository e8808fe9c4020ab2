/** Wire shapes returned by the screening service. Field names follow the
JSON the server emits, so anything decoded here can be used untouched. */

export type Status = "pending" | "include" | "exclude" | "maybe" | "conflict";

export type Verdict = "include" | "exclude" | "maybe";

export type SpanKind = "include" | "exclude" | "evidence";

export interface HighlightSpan {
  start: number;
  end: number;
  kind: SpanKind;
  keyword?: string;
}

export interface RecordPayload {
  ref_id: string;
  title: string;
  abstract: string;
  year: string;
  authors: string[];
  journal: string;
  doi: string;
  pmid: string;
  url: string;
  screening_set: string;
  status: Status;
  highlights: HighlightSpan[];
  score?: number;
}

export interface QueueResponse {
  queue: RecordPayload[];
  pending_total: number;
  mode: "manual" | "ml";
  cold_start: boolean;
}

export interface RecordsResponse {
  records: RecordPayload[];
  total: number;
}

export interface DecisionBody {
  ref_id: string;
  decision: Verdict | "pending";
  reason?: string;
  reviewer_id?: string;
}

export interface DecisionResponse {
  decision_id: string;
  status: Status;
}

export interface EvidenceSpan {
  quote: string;
  start: number;
  end: number;
  valid_offsets: boolean;
}

export interface JudgmentSummary {
  execution_id: string;
  active: boolean;
  probability: number;
  reasons: string[];
  evidence: EvidenceSpan[];
}

export interface JudgmentsResponse {
  ref_id: string;
  judgments: JudgmentSummary[];
}

export interface ExecutionRow {
  execution_id: string;
  execution_type: string;
  timestamp: string;
  model_name: string;
  temperature: number;
  top_p: number;
  thinking_level: string;
  threshold: number;
  targeted_count: number;
  included_count: number;
  excluded_count: number;
  confirmation_status: string;
  active: boolean;
}

export interface ExecutionsResponse {
  executions: ExecutionRow[];
  batch_running: boolean;
  batch_error: string | null;
}

export interface PreviewResponse {
  execution_id: string;
  threshold: number;
  would_include: number;
  would_exclude: number;
}

export interface ConfirmResponse {
  execution_id: string;
  threshold: number;
  included_count: number;
  excluded_count: number;
  confirmation_status: string;
}

export interface StoppingState {
  rule: string;
  n_consecutive: number;
  target_recall: number;
  confidence: number;
  screened: number;
  total_records: number;
  relevant_found: number;
  trailing_run: number;
  p_value: number;
  stop_recommended: boolean;
}

export interface ConflictVote {
  reviewer_id: string;
  decision: string;
  reason: string;
}

export interface ConflictRow {
  ref_id: string;
  votes: ConflictVote[];
}

export interface ConflictsResponse {
  conflicts: ConflictRow[];
}

export interface HealthResponse {
  status: string;
  records: number;
}
