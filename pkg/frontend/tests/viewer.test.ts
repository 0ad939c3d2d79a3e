import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { DEFAULT_STATE, type ViewState } from "../src/state.js";
import {
  artifactKey,
  validateWhatIf,
  Viewer,
  type ViewerCallbacks,
} from "../src/viewer.js";
import { MockService } from "./mockService.js";

let mock: MockService;
let api: ApiClient;
let container: HTMLElement;
let states: ViewState[];
let errors: string[];
let backClicks: number;

function callbacks(): ViewerCallbacks {
  return {
    onStateChange: (state) => states.push(state),
    onBack: () => backClicks++,
    onError: (message) => errors.push(message),
  };
}

function viewState(pair: string): ViewState {
  return {
    ...DEFAULT_STATE,
    view: "viewer",
    pair,
    dataset: "pairs",
    model: "reference",
  };
}

async function mount(pair = "p004"): Promise<Viewer> {
  const viewer = new Viewer(container, api, callbacks(), viewState(pair));
  await viewer.open(viewState(pair));
  return viewer;
}

function imgSrc(which: 1 | 2): string {
  return (
    container
      .querySelector<HTMLImageElement>(`#image-${which}`)!
      .getAttribute("src") ?? ""
  );
}

function field(name: string): string {
  return (
    container.querySelector(`dd[data-field="${name}"]`)!.textContent ?? ""
  );
}

beforeEach(() => {
  mock = new MockService();
  api = new ApiClient(mock.fetch);
  container = document.createElement("div");
  document.body.replaceChildren(container);
  states = [];
  errors = [];
  backClicks = 0;
});

describe("viewer overlays", () => {
  it("shows the stored blended maps for the default method on open", async () => {
    await mount();
    const record = mock.pairs.find((p) => p.pair_id === "p004")!;
    expect(imgSrc(1)).toBe(record.artifact_urls["xmap_1_III"]);
    expect(imgSrc(2)).toBe(record.artifact_urls["xmap_2_III"]);
  });

  it("swaps both images when the method changes", async () => {
    await mount();
    const record = mock.pairs.find((p) => p.pair_id === "p004")!;
    const sel = container.querySelector<HTMLSelectElement>("#method-select")!;
    sel.value = "I";
    sel.dispatchEvent(new Event("change"));
    expect(imgSrc(1)).toBe(record.artifact_urls["xmap_1_I"]);
    expect(imgSrc(2)).toBe(record.artifact_urls["xmap_2_I"]);
    expect(states.at(-1)!.method).toBe("I");
  });

  it("swaps both images when the overlay kind changes", async () => {
    await mount();
    const record = mock.pairs.find((p) => p.pair_id === "p004")!;
    const sel = container.querySelector<HTMLSelectElement>("#overlay-select")!;
    sel.value = "source";
    sel.dispatchEvent(new Event("change"));
    expect(imgSrc(1)).toBe(record.artifact_urls["source_1"]);
    expect(imgSrc(2)).toBe(record.artifact_urls["source_2"]);

    sel.value = "smap";
    sel.dispatchEvent(new Event("change"));
    expect(imgSrc(1)).toBe(record.artifact_urls["smap_1_III"]);
  });

  it("builds artifact keys the same way the server names them", () => {
    expect(artifactKey("source", 1, "III")).toBe("source_1");
    expect(artifactKey("xmap", 2, "I")).toBe("xmap_2_I");
    expect(artifactKey("smap", 1, "II")).toBe("smap_1_II");
  });
});

describe("viewer metadata", () => {
  it("renders the server's numbers verbatim, never recomputing", async () => {
    await mount();
    const record = mock.pairs.find((p) => p.pair_id === "p004")!;
    expect(field("pair")).toBe("p004");
    expect(field("label")).toBe(record.label);
    expect(field("prediction")).toBe(record.prediction);
    expect(field("distance")).toBe((record.d_orig as number).toFixed(6));
    expect(field("threshold")).toBe((record.threshold as number).toFixed(6));
    expect(field("C")).toBe((record.c_score as number).toFixed(4));
  });

  it("reports an unknown pair through onError", async () => {
    const viewer = new Viewer(container, api, callbacks(), viewState("zzz"));
    await viewer.open(viewState("zzz"));
    expect(errors).toHaveLength(1);
    expect(errors[0]).toContain("zzz");
  });

  it("wires the back button to the onBack callback", async () => {
    await mount();
    container.querySelector<HTMLButtonElement>("#back-to-explorer")!.click();
    expect(backClicks).toBe(1);
  });
});

describe("viewer decisions", () => {
  it("posts a verdict and shows it in the history list", async () => {
    const viewer = await mount();
    expect(container.querySelectorAll("#decision-history li")).toHaveLength(0);

    container.querySelector<HTMLSelectElement>("#verdict-select")!.value =
      "imposter";
    container.querySelector<HTMLInputElement>("#operator-input")!.value = "kim";
    container.querySelector<HTMLTextAreaElement>("#note-input")!.value =
      "beard changed";
    container.querySelector<HTMLButtonElement>("#decision-post")!.click();
    await viewer.lastOp;

    const items = container.querySelectorAll("#decision-history li");
    expect(items).toHaveLength(1);
    expect(items[0]!.textContent).toContain("kim");
    expect(items[0]!.textContent).toContain("imposter");
    expect(items[0]!.textContent).toContain("beard changed");
    expect(items[0]!.getAttribute("data-verdict")).toBe("imposter");

    const stored = mock.decisions.get("p004")!;
    expect(stored).toHaveLength(1);
    expect(stored[0]!.verdict).toBe("imposter");
    expect(stored[0]!.operator).toBe("kim");
  });

  it("appends decisions in order across repeated posts", async () => {
    const viewer = await mount();
    container.querySelector<HTMLInputElement>("#operator-input")!.value = "kim";
    container.querySelector<HTMLButtonElement>("#decision-post")!.click();
    await viewer.lastOp;
    container.querySelector<HTMLSelectElement>("#verdict-select")!.value =
      "unsure";
    container.querySelector<HTMLButtonElement>("#decision-post")!.click();
    await viewer.lastOp;

    const items = [...container.querySelectorAll("#decision-history li")];
    expect(items).toHaveLength(2);
    expect(items[0]!.getAttribute("data-verdict")).toBe("genuine");
    expect(items[1]!.getAttribute("data-verdict")).toBe("unsure");
  });

  it("shows the server's message when a decision is rejected", async () => {
    const viewer = await mount();
    // empty operator → the service rejects with 400
    container.querySelector<HTMLInputElement>("#operator-input")!.value = "";
    container.querySelector<HTMLButtonElement>("#decision-post")!.click();
    await viewer.lastOp;
    const notice = container.querySelector<HTMLElement>("#decision-notice")!;
    expect(notice.hasAttribute("hidden")).toBe(false);
    expect(notice.textContent).toContain("operator");
    expect(container.querySelectorAll("#decision-history li")).toHaveLength(0);
  });
});

describe("viewer what-if", () => {
  it("recomputes with edited parameters and swaps in scratch artifacts", async () => {
    const viewer = await mount();
    const storeUrl = imgSrc(1);

    container.querySelector<HTMLInputElement>("#whatif-patch-sizes")!.value = "7";
    container.querySelector<HTMLInputElement>("#whatif-stride")!.value = "5";
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;

    // the form carried the edited parameters plus both source blobs
    expect(mock.explainCalls).toHaveLength(1);
    const form = mock.explainCalls[0]!;
    expect(form.get("patch_sizes")).toBe("7");
    expect(form.get("stride")).toBe("5");
    expect(form.get("method")).toBe("III");
    expect(form.get("fill")).toBe("black");
    expect(form.get("shape")).toBe("rect");
    expect(form.get("edge_blur")).toBeNull();
    expect(form.get("mode")).toBe("sync");
    expect(form.get("img1")).toBeInstanceOf(Blob);
    expect(form.get("img2")).toBeInstanceOf(Blob);
    expect((form.get("img1") as Blob).size).toBeGreaterThan(0);

    // images now come from the job's scratch space, not the store
    expect(imgSrc(1)).toBe("/api/scratch/job-1/xmap_1_III.png");
    expect(imgSrc(2)).toBe("/api/scratch/job-1/xmap_2_III.png");
    expect(imgSrc(1)).not.toBe(storeUrl);

    // and the recomputed distance is displayed
    expect(
      container.querySelector("#whatif-result")!.textContent,
    ).toContain("0.512345");
  });

  it("uploads the pair's own stored source images", async () => {
    const viewer = await mount();
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;
    const artifactGets = mock.requests.filter(
      (r) => r.path === "/api/pairs/p004/artifact",
    );
    const kinds = artifactGets.map(
      (r) => new URL(r.url, "http://t").searchParams.get("kind"),
    );
    expect(kinds).toEqual(["source", "source"]);
  });

  it("falls back to stored maps for methods the what-if did not cover", async () => {
    const viewer = await mount();
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;
    expect(imgSrc(1)).toContain("/api/scratch/");

    const record = mock.pairs.find((p) => p.pair_id === "p004")!;
    const sel = container.querySelector<HTMLSelectElement>("#method-select")!;
    sel.value = "I";
    sel.dispatchEvent(new Event("change"));
    expect(imgSrc(1)).toBe(record.artifact_urls["xmap_1_I"]);
  });

  it("allows only one recompute in flight per pair", async () => {
    const viewer = await mount();
    const run = container.querySelector<HTMLButtonElement>("#whatif-run")!;
    run.click();
    const first = viewer.lastOp;
    run.click(); // second click while the first is awaiting
    const second = viewer.lastOp;
    await Promise.all([first, second]);
    expect(mock.explainCalls).toHaveLength(1);
  });

  it("shows a notice and keeps the draft when no backend is available", async () => {
    mock.failExplain = {
      status: 503,
      code: "no_backend",
      detail: "no embedding backend configured",
    };
    const viewer = await mount();
    const storeUrl = imgSrc(1);
    const sizes = container.querySelector<HTMLInputElement>(
      "#whatif-patch-sizes",
    )!;
    sizes.value = "7";
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;

    const notice = container.querySelector<HTMLElement>("#whatif-notice")!;
    expect(notice.hasAttribute("hidden")).toBe(false);
    expect(notice.textContent).toContain("not available");
    // draft and images untouched
    expect(sizes.value).toBe("7");
    expect(imgSrc(1)).toBe(storeUrl);
    // the button is usable again
    expect(
      container.querySelector<HTMLButtonElement>("#whatif-run")!.disabled,
    ).toBe(false);
  });

  it("tells the operator to retry when the queue is full", async () => {
    mock.failExplain = {
      status: 429,
      code: "queue_full",
      detail: "job queue is full",
    };
    const viewer = await mount();
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;
    expect(
      container.querySelector("#whatif-notice")!.textContent,
    ).toContain("try again");
  });

  it("rejects out-of-range drafts locally without hitting the service", async () => {
    const viewer = await mount();
    container.querySelector<HTMLInputElement>("#whatif-patch-sizes")!.value =
      "0,14";
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;
    const notice = container.querySelector<HTMLElement>("#whatif-notice")!;
    expect(notice.hasAttribute("hidden")).toBe(false);
    expect(notice.textContent).toContain("patch size");
    expect(mock.explainCalls).toHaveLength(0);
    expect(
      mock.requests.filter((r) => r.path === "/api/explain"),
    ).toHaveLength(0);
  });

  it("carries fill, shape, and edge blur selections into the form", async () => {
    const viewer = await mount();
    container.querySelector<HTMLSelectElement>("#whatif-fill")!.value = "noise";
    container.querySelector<HTMLSelectElement>("#whatif-shape")!.value = "round";
    container.querySelector<HTMLInputElement>("#whatif-edge-blur")!.value =
      "3,1.5";
    container.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    await viewer.lastOp;
    const form = mock.explainCalls[0]!;
    expect(form.get("fill")).toBe("noise");
    expect(form.get("shape")).toBe("round");
    expect(form.get("edge_blur")).toBe("3,1.5");
  });
});

describe("what-if draft validation", () => {
  const ok = { patch_sizes: "7,14,28", stride: "5", edge_blur: "" };

  it("accepts the default draft", () => {
    expect(validateWhatIf(ok)).toBeNull();
  });

  it("accepts the full valid parameter range", () => {
    expect(validateWhatIf({ ...ok, patch_sizes: "1,111" })).toBeNull();
    expect(validateWhatIf({ ...ok, stride: "1" })).toBeNull();
    expect(validateWhatIf({ ...ok, edge_blur: "1,0.5" })).toBeNull();
  });

  it("rejects sizes outside [1, 111]", () => {
    expect(validateWhatIf({ ...ok, patch_sizes: "0" })).toContain("patch size");
    expect(validateWhatIf({ ...ok, patch_sizes: "112" })).toContain("patch size");
    expect(validateWhatIf({ ...ok, patch_sizes: "7.5" })).toContain("patch size");
    expect(validateWhatIf({ ...ok, patch_sizes: "abc" })).toContain("patch size");
    expect(validateWhatIf({ ...ok, patch_sizes: "" })).toContain(
      "at least one",
    );
  });

  it("rejects non-positive or fractional strides", () => {
    expect(validateWhatIf({ ...ok, stride: "0" })).toContain("stride");
    expect(validateWhatIf({ ...ok, stride: "-3" })).toContain("stride");
    expect(validateWhatIf({ ...ok, stride: "2.5" })).toContain("stride");
  });

  it("rejects malformed edge blur settings", () => {
    expect(validateWhatIf({ ...ok, edge_blur: "3" })).toContain("edge blur");
    expect(validateWhatIf({ ...ok, edge_blur: "0,1" })).toContain("edge blur");
    expect(validateWhatIf({ ...ok, edge_blur: "3,0" })).toContain("edge blur");
    expect(validateWhatIf({ ...ok, edge_blur: "3,1,2" })).toContain("edge blur");
  });
});
