/**
 * Session state: token, current item, monotone progress, pending retries.
 *
 * The server is the source of truth. Progress advances optimistically on
 * submit and reconciles against every server acknowledgement, but it never
 * moves backwards — a stale ack cannot regress the bar.
 */

import type { Choice, ItemView, Progress } from "./api.js";

export interface JudgedEntry {
  itemId: string;
  choice: Choice;
  rationale?: string;
  /** false until the server acknowledged the judgment */
  confirmed: boolean;
}

export interface SessionState {
  token: string | null;
  annotatorId: string | null;
  current: ItemView | null;
  judged: number;
  total: number;
  /** judgments posted but not yet acknowledged */
  pending: number;
  /** the local history view; reconciled entries mirror the server record */
  history: JudgedEntry[];
  done: boolean;
}

export function initialState(): SessionState {
  return {
    token: null,
    annotatorId: null,
    current: null,
    judged: 0,
    total: 0,
    pending: 0,
    history: [],
    done: false,
  };
}

export function applyRegistration(state: SessionState, token: string, annotatorId: string | null, total: number): void {
  state.token = token;
  state.annotatorId = annotatorId;
  state.total = Math.max(state.total, total);
}

export function applyItem(state: SessionState, view: ItemView): void {
  if (state.token === null) {
    throw new Error("no item fetch before registration");
  }
  reconcileProgress(state, view.progress);
  if (view.done) {
    state.done = true;
    state.current = null;
  } else {
    state.current = view;
  }
}

/** Progress is monotone non-decreasing regardless of response ordering. */
export function reconcileProgress(state: SessionState, progress: Progress): void {
  state.judged = Math.max(state.judged, progress.judged);
  state.total = Math.max(state.total, progress.total);
}

export function recordOptimistic(state: SessionState, itemId: string, choice: Choice, rationale?: string): JudgedEntry {
  const entry: JudgedEntry = { itemId, choice, rationale, confirmed: false };
  state.history.push(entry);
  state.pending += 1;
  state.judged = Math.min(state.total, state.judged + 1);
  return entry;
}

export function confirmEntry(state: SessionState, entry: JudgedEntry, progress: Progress): void {
  entry.confirmed = true;
  state.pending = Math.max(0, state.pending - 1);
  reconcileProgress(state, progress);
}

export function progressPercent(state: SessionState): number {
  if (state.total === 0) {
    return 0;
  }
  return Math.round((100 * state.judged) / state.total);
}
