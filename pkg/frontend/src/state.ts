/** View state <-> URL query string.
 *
 * The whole UI state (which view, which pair, filters, sort, page,
 * overlay) lives in the URL so reloading or sharing a link restores the
 * exact same view.
 */

import type { ArtifactKind, Label, MethodName, Prediction } from "./types.js";

export interface ViewState {
  view: "explorer" | "viewer";
  dataset?: string;
  model?: string;
  /** Selected pair (viewer only). */
  pair?: string;
  /** Overlay selection (viewer only). */
  method: MethodName;
  overlay: ArtifactKind;
  /** Explorer filters. */
  label?: Label;
  prediction?: Prediction;
  correct?: "correct" | "wrong";
  c_min?: number;
  c_max?: number;
  /** Explorer ordering/pagination. */
  sort: "pair_id" | "distance" | "c";
  order: "asc" | "desc";
  page: number;
  per_page: number;
}

export const DEFAULT_STATE: ViewState = {
  view: "explorer",
  method: "III",
  overlay: "xmap",
  sort: "pair_id",
  order: "asc",
  page: 1,
  per_page: 25,
};

const LABELS: Label[] = ["genuine", "imposter", "unknown"];
const PREDICTIONS: Prediction[] = ["genuine", "imposter"];
const METHODS: MethodName[] = ["I", "II", "III"];
const OVERLAYS: ArtifactKind[] = ["source", "xmap", "smap"];
const SORTS = ["pair_id", "distance", "c"] as const;

function pick<T extends string>(value: string | null, allowed: readonly T[], fallback: T): T;
function pick<T extends string>(value: string | null, allowed: readonly T[]): T | undefined;
function pick<T extends string>(
  value: string | null,
  allowed: readonly T[],
  fallback?: T,
): T | undefined {
  if (value !== null && (allowed as readonly string[]).includes(value)) {
    return value as T;
  }
  return fallback;
}

function pickNumber(value: string | null): number | undefined {
  if (value === null || value.trim() === "") return undefined;
  const n = Number(value);
  return Number.isFinite(n) ? n : undefined;
}

/** Parse a query string ("?view=…" or "view=…") into a full state. */
export function parseState(search: string): ViewState {
  const q = new URLSearchParams(search.startsWith("?") ? search.slice(1) : search);
  const page = pickNumber(q.get("page"));
  const perPage = pickNumber(q.get("per_page"));
  return {
    view: q.get("view") === "viewer" ? "viewer" : "explorer",
    dataset: q.get("dataset") ?? undefined,
    model: q.get("model") ?? undefined,
    pair: q.get("pair") ?? undefined,
    method: pick(q.get("method"), METHODS, DEFAULT_STATE.method),
    overlay: pick(q.get("overlay"), OVERLAYS, DEFAULT_STATE.overlay),
    label: pick(q.get("label"), LABELS),
    prediction: pick(q.get("prediction"), PREDICTIONS),
    correct: pick(q.get("correct"), ["correct", "wrong"] as const),
    c_min: pickNumber(q.get("c_min")),
    c_max: pickNumber(q.get("c_max")),
    sort: pick(q.get("sort"), SORTS, DEFAULT_STATE.sort),
    order: q.get("order") === "desc" ? "desc" : "asc",
    page: page !== undefined && page >= 1 ? Math.floor(page) : DEFAULT_STATE.page,
    per_page:
      perPage !== undefined && perPage >= 1
        ? Math.floor(perPage)
        : DEFAULT_STATE.per_page,
  };
}

/** Encode a state back into a query string; defaults are omitted. */
export function encodeState(state: ViewState): string {
  const q = new URLSearchParams();
  if (state.view !== DEFAULT_STATE.view) q.set("view", state.view);
  if (state.dataset) q.set("dataset", state.dataset);
  if (state.model) q.set("model", state.model);
  if (state.pair) q.set("pair", state.pair);
  if (state.method !== DEFAULT_STATE.method) q.set("method", state.method);
  if (state.overlay !== DEFAULT_STATE.overlay) q.set("overlay", state.overlay);
  if (state.label) q.set("label", state.label);
  if (state.prediction) q.set("prediction", state.prediction);
  if (state.correct) q.set("correct", state.correct);
  if (state.c_min !== undefined) q.set("c_min", String(state.c_min));
  if (state.c_max !== undefined) q.set("c_max", String(state.c_max));
  if (state.sort !== DEFAULT_STATE.sort) q.set("sort", state.sort);
  if (state.order !== DEFAULT_STATE.order) q.set("order", state.order);
  if (state.page !== DEFAULT_STATE.page) q.set("page", String(state.page));
  if (state.per_page !== DEFAULT_STATE.per_page) q.set("per_page", String(state.per_page));
  const text = q.toString();
  return text ? `?${text}` : "";
}
