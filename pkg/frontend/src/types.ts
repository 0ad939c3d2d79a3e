/** JSON documents served by the results API. */

export type Label = "genuine" | "imposter" | "unknown";
export type Prediction = "genuine" | "imposter";
export type Verdict = "genuine" | "imposter" | "unsure";
export type MethodName = "I" | "II" | "III";
export type ArtifactKind = "source" | "xmap" | "smap";

/** One pair's result record as served by `/api/pairs` and `/api/pairs/{id}`. */
export interface PairDoc {
  pair_id: string;
  dataset: string;
  model: string;
  label: Label;
  fold: number;
  path1: string;
  path2: string;
  status: "ok" | "failed";
  error: string | null;
  d_orig: number | null;
  threshold: number | null;
  prediction: Prediction | null;
  c_score: number | null;
  methods: MethodName[];
  parameters: Record<string, unknown>[];
  artifacts: Record<string, string>;
  image_quality: number | null;
  created_at: string;
  /** true/false when both label and prediction are known, else null. */
  correct: boolean | null;
  /** Server-generated API URLs, one per artifact key (e.g. "xmap_1_III"). */
  artifact_urls: Record<string, string>;
}

export interface PairsPage {
  items: PairDoc[];
  total: number;
  page: number;
  per_page: number;
}

export interface DecisionDoc {
  pair_id: string;
  dataset: string;
  model: string;
  operator: string;
  verdict: Verdict;
  note: string;
  created_at: string;
}

/** Synchronous (or completed-job) response of `POST /api/explain`. */
export interface ExplainDoc {
  job_id: string;
  d_orig: number;
  methods: MethodName[];
  parameters: Record<string, unknown>[];
  threshold: number | null;
  prediction: Prediction | null;
  c_score: number | null;
  artifacts: Record<string, string>;
}

export interface JobDoc {
  status: "queued" | "running" | "done" | "failed";
  result?: ExplainDoc;
  error?: string;
}

export interface ApiError {
  error: string;
  detail: string;
}

export interface PairsQuery {
  dataset?: string;
  model?: string;
  label?: Label;
  prediction?: Prediction;
  correct?: "correct" | "wrong";
  c_min?: number;
  c_max?: number;
  d_min?: number;
  d_max?: number;
  sort?: "pair_id" | "distance" | "c";
  order?: "asc" | "desc";
  page?: number;
  per_page?: number;
}

export interface WhatIfRequest {
  img1: Blob;
  img2: Blob;
  method: MethodName;
  patch_sizes: string;
  stride: number;
  fill: "black" | "gray" | "white" | "noise";
  shape: "rect" | "round";
  /** Optional "KERNEL,SIGMA" soft-edge setting; empty string omits it. */
  edge_blur: string;
  mode: "sync";
}
