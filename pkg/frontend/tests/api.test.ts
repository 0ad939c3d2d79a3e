import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiRequestError } from "../src/api.js";
import { MockService } from "./mockService.js";

let mock: MockService;
let api: ApiClient;

beforeEach(() => {
  mock = new MockService();
  api = new ApiClient(mock.fetch);
});

/** Read a Blob's text through FileReader (jsdom's Blob has no .text()). */
function blobText(blob: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () => reject(reader.error);
    reader.readAsText(blob);
  });
}

describe("ApiClient request shapes", () => {
  it("lists datasets and models from the documented endpoints", async () => {
    expect(await api.datasets()).toEqual(["pairs"]);
    expect(await api.models("pairs")).toEqual(["reference"]);
    expect(mock.requests.map((r) => r.url)).toEqual([
      "/api/datasets",
      "/api/models?dataset=pairs",
    ]);
  });

  it("serialises pair queries, skipping unset fields", async () => {
    await api.listPairs({
      label: "genuine",
      c_min: 0.5,
      sort: "c",
      order: "desc",
      page: 2,
      per_page: 10,
    });
    expect(mock.requests[0]!.url).toBe(
      "/api/pairs?label=genuine&c_min=0.5&sort=c&order=desc&page=2&per_page=10",
    );
  });

  it("fetches one pair with its dataset/model scope", async () => {
    const doc = await api.getPair("p004", "pairs", "reference");
    expect(doc.pair_id).toBe("p004");
    expect(mock.requests[0]!.url).toBe(
      "/api/pairs/p004?dataset=pairs&model=reference",
    );
  });

  it("posts a decision as JSON and returns the stored document", async () => {
    const doc = await api.postDecision(
      "p001",
      { verdict: "unsure", operator: "sam", note: "glare" },
      "pairs",
      "reference",
    );
    expect(doc.verdict).toBe("unsure");
    expect(doc.operator).toBe("sam");
    expect(doc.created_at).not.toBe("");
    expect(await api.decisions("p001", "pairs")).toEqual([doc]);
  });

  it("raises ApiRequestError carrying the server's error envelope", async () => {
    const err = await api.getPair("nope").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    const apiErr = err as ApiRequestError;
    expect(apiErr.status).toBe(404);
    expect(apiErr.code).toBe("not_found");
    expect(apiErr.message).toContain("nope");
  });

  it("downloads artifacts as blobs via the record's own URLs", async () => {
    const doc = await api.getPair("p002");
    const blob = await api.fetchArtifact(doc.artifact_urls["xmap_1_III"]!);
    expect(await blobText(blob)).toBe("artifact:p002:xmap:1:III");
  });

  it("submits what-if recomputes as multipart form data", async () => {
    const doc = await api.explain({
      img1: new Blob(["a"]),
      img2: new Blob(["b"]),
      method: "II",
      patch_sizes: "7,14",
      stride: 3,
      fill: "noise",
      shape: "round",
      edge_blur: "3,1.5",
      mode: "sync",
    });
    expect(doc.methods).toEqual(["II"]);
    expect(Object.keys(doc.artifacts).sort()).toEqual([
      "smap_1_II",
      "smap_2_II",
      "source_1",
      "source_2",
      "xmap_1_II",
      "xmap_2_II",
    ]);
    const form = mock.explainCalls[0]!;
    expect(form.get("method")).toBe("II");
    expect(form.get("patch_sizes")).toBe("7,14");
    expect(form.get("stride")).toBe("3");
    expect(form.get("fill")).toBe("noise");
    expect(form.get("shape")).toBe("round");
    expect(form.get("edge_blur")).toBe("3,1.5");
    expect(form.get("mode")).toBe("sync");
    expect(form.get("img1")).toBeInstanceOf(Blob);
    expect(form.get("img2")).toBeInstanceOf(Blob);
  });

  it("omits the edge blur field when the draft leaves it empty", async () => {
    await api.explain({
      img1: new Blob(["a"]),
      img2: new Blob(["b"]),
      method: "III",
      patch_sizes: "28",
      stride: 14,
      fill: "black",
      shape: "rect",
      edge_blur: "",
      mode: "sync",
    });
    expect(mock.explainCalls[0]!.get("edge_blur")).toBeNull();
  });

  it("surfaces explain failures with their status codes", async () => {
    mock.failExplain = {
      status: 503,
      code: "no_backend",
      detail: "no embedding backend configured",
    };
    const err = await api
      .explain({
        img1: new Blob(["a"]),
        img2: new Blob(["b"]),
        method: "III",
        patch_sizes: "28",
        stride: 14,
        fill: "black",
        shape: "rect",
        edge_blur: "",
        mode: "sync",
      })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect((err as ApiRequestError).status).toBe(503);
    expect((err as ApiRequestError).code).toBe("no_backend");
  });
});
