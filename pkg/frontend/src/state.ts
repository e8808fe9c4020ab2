import type { RecordPayload } from "./types.js";

export type Filter = "all" | "pending" | "include" | "exclude" | "conflict";
export type Mode = "manual" | "ml";

export const FILTERS: Filter[] = ["all", "pending", "include", "exclude", "conflict"];

export interface ViewState {
  items: RecordPayload[];
  cursor: number;
  filter: Filter;
  mode: Mode;
  executionId: string | null;
  threshold: number;
}

export function initialState(): ViewState {
  return {
    items: [],
    cursor: 0,
    filter: "pending",
    mode: "manual",
    executionId: null,
    threshold: 0.5,
  };
}

/** Cursor always lands inside the list; 0 when the list is empty. */
export function clampCursor(state: ViewState): ViewState {
  const max = Math.max(state.items.length - 1, 0);
  const cursor = Math.min(Math.max(state.cursor, 0), max);
  return cursor === state.cursor ? state : { ...state, cursor };
}

export function setItems(state: ViewState, items: RecordPayload[]): ViewState {
  return clampCursor({ ...state, items });
}

export function current(state: ViewState): RecordPayload | null {
  return state.items[state.cursor] ?? null;
}

/**
 * Move past the current record. In ml mode the caller must refetch the
 * queue afterwards so the retrained ordering takes effect; manual mode
 * keeps the fetched order.
 */
export function advance(state: ViewState): { state: ViewState; refetch: boolean } {
  return {
    state: clampCursor({ ...state, cursor: state.cursor + 1 }),
    refetch: state.mode === "ml",
  };
}

export function retreat(state: ViewState): ViewState {
  return clampCursor({ ...state, cursor: state.cursor - 1 });
}

export function moveTo(state: ViewState, index: number): ViewState {
  return clampCursor({ ...state, cursor: index });
}

export function parseFilter(raw: string | null): Filter {
  return (FILTERS as string[]).includes(raw ?? "") ? (raw as Filter) : "pending";
}

export function parseMode(raw: string | null): Mode {
  return raw === "ml" ? "ml" : "manual";
}
