/** Typed client for the results service.
 *
 * Every request goes through one injected fetch function, so tests can
 * substitute an in-memory service, and the whole UI provably talks only
 * to these documented endpoints. No score or map is ever computed here —
 * the client hands back server documents untouched.
 */

import type {
  DecisionDoc,
  ExplainDoc,
  PairDoc,
  PairsPage,
  PairsQuery,
  Verdict,
  WhatIfRequest,
} from "./types.js";

/** Structural subset of window.fetch that the client needs. */
export interface FetchResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  blob(): Promise<Blob>;
}
export type FetchLike = (url: string, init?: RequestInit) => Promise<FetchResponse>;

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiRequestError";
  }
}

async function errorFrom(resp: FetchResponse): Promise<ApiRequestError> {
  let code = "error";
  let detail = `request failed with status ${resp.status}`;
  try {
    const doc = (await resp.json()) as { error?: string; detail?: string };
    if (doc && typeof doc.error === "string") code = doc.error;
    if (doc && typeof doc.detail === "string") detail = doc.detail;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiRequestError(resp.status, code, detail);
}

function query(params: Record<string, string | number | undefined>): string {
  const q = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined && value !== "") q.set(key, String(value));
  }
  const text = q.toString();
  return text ? `?${text}` : "";
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as T;
  }

  async datasets(): Promise<string[]> {
    const doc = await this.getJson<{ datasets: string[] }>("/api/datasets");
    return doc.datasets;
  }

  async models(dataset?: string): Promise<string[]> {
    const doc = await this.getJson<{ models: string[] }>(
      `/api/models${query({ dataset })}`,
    );
    return doc.models;
  }

  async listPairs(q: PairsQuery): Promise<PairsPage> {
    return this.getJson<PairsPage>(`/api/pairs${query({ ...q })}`);
  }

  async getPair(pairId: string, dataset?: string, model?: string): Promise<PairDoc> {
    return this.getJson<PairDoc>(
      `/api/pairs/${encodeURIComponent(pairId)}${query({ dataset, model })}`,
    );
  }

  async decisions(pairId: string, dataset?: string): Promise<DecisionDoc[]> {
    const doc = await this.getJson<{ decisions: DecisionDoc[] }>(
      `/api/pairs/${encodeURIComponent(pairId)}/decisions${query({ dataset })}`,
    );
    return doc.decisions;
  }

  async postDecision(
    pairId: string,
    body: { verdict: Verdict; operator: string; note: string },
    dataset?: string,
    model?: string,
  ): Promise<DecisionDoc> {
    const resp = await this.fetchFn(
      `${this.base}/api/pairs/${encodeURIComponent(pairId)}/decision${query({ dataset, model })}`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as DecisionDoc;
  }

  /** Fetch an artifact (or scratch) PNG as a Blob, e.g. for re-upload. */
  async fetchArtifact(url: string): Promise<Blob> {
    const resp = await this.fetchFn(this.base + url);
    if (!resp.ok) throw await errorFrom(resp);
    return resp.blob();
  }

  /** Synchronous what-if recompute over two uploaded images. */
  async explain(req: WhatIfRequest): Promise<ExplainDoc> {
    const form = new FormData();
    form.append("img1", req.img1, "img1.png");
    form.append("img2", req.img2, "img2.png");
    form.append("method", req.method);
    form.append("patch_sizes", req.patch_sizes);
    form.append("stride", String(req.stride));
    form.append("fill", req.fill);
    form.append("shape", req.shape);
    if (req.edge_blur !== "") form.append("edge_blur", req.edge_blur);
    form.append("mode", req.mode);
    const resp = await this.fetchFn(`${this.base}/api/explain`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as ExplainDoc;
  }
}
