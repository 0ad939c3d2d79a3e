/** Viewer: side-by-side pair inspection, adjudication, and what-if.
 *
 * Images are always the server's pre-rendered PNGs — the source copies,
 * the blended explanation maps (xmap) or the raw colormapped maps
 * (smap) — selected by overlay kind and method. A what-if recompute
 * uploads the pair's source PNGs back to `/api/explain` with edited
 * sweep parameters and swaps in the returned scratch artifacts; nothing
 * is ever computed client-side.
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { clear, el, num } from "./dom.js";
import type { ViewState } from "./state.js";
import type {
  ArtifactKind,
  DecisionDoc,
  ExplainDoc,
  MethodName,
  PairDoc,
  Verdict,
} from "./types.js";

export interface ViewerCallbacks {
  onStateChange(state: ViewState): void;
  onBack(): void;
  onError(message: string, retry: () => void): void;
}

export function artifactKey(
  overlay: ArtifactKind,
  which: 1 | 2,
  method: MethodName,
): string {
  return overlay === "source" ? `source_${which}` : `${overlay}_${which}_${method}`;
}

export interface WhatIfDraft {
  patch_sizes: string;
  stride: string;
  edge_blur: string;
}

/** Check a what-if draft against the service's parameter ranges.
 *
 * Mirrors the server-side rules (patch size in [1, 111] so the sweep is
 * non-empty, stride >= 1, edge blur "KERNEL,SIGMA" with kernel >= 1 and
 * sigma > 0) so bad drafts never leave the browser. Returns an error
 * message, or null when the draft is valid.
 */
export function validateWhatIf(draft: WhatIfDraft): string | null {
  const sizes = draft.patch_sizes
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s !== "");
  if (sizes.length === 0) return "at least one patch size is required";
  for (const s of sizes) {
    const n = Number(s);
    if (!Number.isInteger(n) || n < 1 || n > 111) {
      return `patch size must be an integer in [1, 111], got ${s}`;
    }
  }
  const stride = Number(draft.stride);
  if (!Number.isInteger(stride) || stride < 1) {
    return `stride must be a positive integer, got ${draft.stride}`;
  }
  const blur = draft.edge_blur.trim();
  if (blur !== "") {
    const parts = blur.split(",");
    const kernel = Number(parts[0]);
    const sigma = Number(parts[1]);
    if (parts.length !== 2 || !Number.isInteger(kernel) || kernel < 1 || !(sigma > 0)) {
      return "edge blur must be KERNEL,SIGMA with kernel >= 1 and sigma > 0";
    }
  }
  return null;
}

export class Viewer {
  /** Resolves when the most recent operation settles (for tests). */
  lastOp: Promise<void> = Promise.resolve();

  private state: ViewState;
  private record: PairDoc | null = null;
  private whatIf: ExplainDoc | null = null;
  private whatIfPending = false;
  private decisionPending = false;
  /** Monotone open counter; a stale pair fetch is dropped, never rendered. */
  private loadSeq = 0;

  constructor(
    private readonly container: HTMLElement,
    private readonly api: ApiClient,
    private readonly callbacks: ViewerCallbacks,
    initial: ViewState,
  ) {
    this.state = { ...initial };
  }

  open(state: ViewState): Promise<void> {
    this.state = { ...state };
    this.whatIf = null;
    this.lastOp = this.loadPair();
    return this.lastOp;
  }

  private async loadPair(): Promise<void> {
    if (!this.state.pair) return;
    const seq = ++this.loadSeq;
    try {
      const record = await this.api.getPair(
        this.state.pair,
        this.state.dataset,
        this.state.model,
      );
      const history = await this.api.decisions(record.pair_id, record.dataset);
      if (seq !== this.loadSeq) return; // another pair was opened meanwhile
      this.record = record;
      this.render(history);
    } catch (exc) {
      if (seq !== this.loadSeq) return;
      this.callbacks.onError(
        exc instanceof Error ? exc.message : String(exc),
        () => void this.open(this.state),
      );
    }
  }

  /** The URL each image should currently display. */
  imageUrl(which: 1 | 2): string {
    const key = artifactKey(this.state.overlay, which, this.state.method);
    if (this.whatIf && this.whatIf.artifacts[key] !== undefined) {
      return this.whatIf.artifacts[key];
    }
    return this.record?.artifact_urls[key] ?? "";
  }

  private applyImages(): void {
    for (const which of [1, 2] as const) {
      const img = this.container.querySelector<HTMLImageElement>(`#image-${which}`);
      if (img) img.src = this.imageUrl(which);
    }
  }

  setMethod(method: MethodName): void {
    this.state = { ...this.state, method };
    // store artifacts exist per method; a previous what-if only covers
    // the method it was run with, so fall back to the store rendering
    if (this.whatIf && !this.whatIf.methods.includes(method)) this.whatIf = null;
    this.callbacks.onStateChange(this.state);
    this.applyImages();
  }

  setOverlay(overlay: ArtifactKind): void {
    this.state = { ...this.state, overlay };
    this.callbacks.onStateChange(this.state);
    this.applyImages();
  }

  // -- rendering -----------------------------------------------------------

  private render(history: DecisionDoc[]): void {
    if (!this.record) return;
    clear(this.container);
    this.container.append(
      this.toolbar(),
      this.images(),
      this.metadata(),
      this.whatIfPanel(),
      this.decisionPanel(history),
    );
    this.applyImages();
  }

  private toolbar(): HTMLElement {
    const back = el("button", { id: "back-to-explorer", type: "button" }, ["back"]);
    back.addEventListener("click", () => this.callbacks.onBack());

    const overlay = el("select", { id: "overlay-select" });
    for (const kind of ["source", "xmap", "smap"]) {
      overlay.append(el("option", { value: kind }, [kind]));
    }
    overlay.value = this.state.overlay;
    overlay.addEventListener("change", () =>
      this.setOverlay(overlay.value as ArtifactKind),
    );

    const method = el("select", { id: "method-select" });
    for (const m of ["I", "II", "III"]) {
      method.append(el("option", { value: m }, [`method ${m}`]));
    }
    method.value = this.state.method;
    method.addEventListener("change", () =>
      this.setMethod(method.value as MethodName),
    );

    return el("div", { class: "viewer-toolbar" }, [back, overlay, method]);
  }

  private images(): HTMLElement {
    return el("div", { class: "viewer-images" }, [
      el("figure", {}, [
        el("img", { id: "image-1", alt: "image 1" }),
        el("figcaption", {}, ["image 1"]),
      ]),
      el("figure", {}, [
        el("img", { id: "image-2", alt: "image 2" }),
        el("figcaption", {}, ["image 2"]),
      ]),
    ]);
  }

  private metadata(): HTMLElement {
    const r = this.record!;
    const rows: [string, string][] = [
      ["pair", r.pair_id],
      ["dataset", r.dataset],
      ["model", r.model],
      ["label", r.label],
      ["prediction", r.prediction ?? "—"],
      ["distance", num(r.d_orig, 6)],
      ["threshold", num(r.threshold, 6)],
      ["C", num(r.c_score, 4)],
    ];
    const dl = el("dl", { id: "metadata" });
    for (const [key, value] of rows) {
      dl.append(
        el("dt", {}, [key]),
        el("dd", { "data-field": key }, [value]),
      );
    }
    return dl;
  }

  // -- what-if -------------------------------------------------------------

  private whatIfPanel(): HTMLElement {
    const sizes = el("input", {
      id: "whatif-patch-sizes",
      type: "text",
      value: "7,14,28",
    });
    const stride = el("input", {
      id: "whatif-stride",
      type: "number",
      min: "1",
      value: "5",
    });
    const fill = el("select", { id: "whatif-fill" });
    for (const f of ["black", "gray", "white", "noise"]) {
      fill.append(el("option", { value: f }, [f]));
    }
    const shape = el("select", { id: "whatif-shape" });
    for (const s of ["rect", "round"]) {
      shape.append(el("option", { value: s }, [s]));
    }
    const blur = el("input", {
      id: "whatif-edge-blur",
      type: "text",
      placeholder: "kernel,sigma",
    });
    const run = el("button", { id: "whatif-run", type: "button" }, ["recompute"]);
    run.addEventListener("click", () => {
      this.lastOp = this.runWhatIf();
    });
    return el("section", { id: "whatif" }, [
      el("h3", {}, ["what-if"]),
      this.fieldLabel("patch sizes ", sizes),
      this.fieldLabel("stride ", stride),
      this.fieldLabel("fill ", fill),
      this.fieldLabel("shape ", shape),
      this.fieldLabel("edge blur ", blur),
      run,
      el("span", { id: "whatif-result" }),
      el("div", { id: "whatif-notice", class: "notice", hidden: "" }),
    ]);
  }

  private fieldLabel(text: string, control: HTMLElement): HTMLElement {
    return el("label", {}, [text, control]);
  }

  private notice(message: string): void {
    const box = this.container.querySelector<HTMLElement>("#whatif-notice");
    if (box) {
      box.textContent = message;
      box.removeAttribute("hidden");
    }
  }

  private hideNotice(): void {
    const box = this.container.querySelector<HTMLElement>("#whatif-notice");
    if (box) box.setAttribute("hidden", "");
  }

  private async runWhatIf(): Promise<void> {
    if (!this.record || this.whatIfPending) return; // one in flight per pair
    const value = (id: string): string =>
      this.container.querySelector<HTMLInputElement | HTMLSelectElement>(`#${id}`)
        ?.value ?? "";
    const draft: WhatIfDraft = {
      patch_sizes: value("whatif-patch-sizes"),
      stride: value("whatif-stride"),
      edge_blur: value("whatif-edge-blur"),
    };
    const problem = validateWhatIf(draft);
    if (problem !== null) {
      this.notice(problem);
      return;
    }
    this.hideNotice();

    this.whatIfPending = true;
    const runBtn = this.container.querySelector<HTMLButtonElement>("#whatif-run");
    if (runBtn) runBtn.disabled = true;
    try {
      const [img1, img2] = await Promise.all([
        this.api.fetchArtifact(this.record.artifact_urls["source_1"]!),
        this.api.fetchArtifact(this.record.artifact_urls["source_2"]!),
      ]);
      const doc = await this.api.explain({
        img1,
        img2,
        method: this.state.method,
        patch_sizes: draft.patch_sizes,
        stride: Number(draft.stride),
        fill: value("whatif-fill") as "black" | "gray" | "white" | "noise",
        shape: value("whatif-shape") as "rect" | "round",
        edge_blur: draft.edge_blur.trim(),
        mode: "sync",
      });
      this.whatIf = doc;
      const result = this.container.querySelector<HTMLElement>("#whatif-result");
      if (result) {
        result.textContent =
          `recomputed: distance ${num(doc.d_orig, 6)}` +
          (doc.c_score !== null
            ? `, ${doc.prediction} (C ${num(doc.c_score, 4)})`
            : "");
      }
      this.applyImages();
    } catch (exc) {
      if (exc instanceof ApiRequestError && (exc.status === 503 || exc.status === 429)) {
        this.notice(
          exc.status === 503
            ? "live recompute is not available on this server"
            : "recompute queue is full — try again shortly",
        );
      } else {
        this.notice(exc instanceof Error ? exc.message : String(exc));
      }
    } finally {
      this.whatIfPending = false;
      if (runBtn) runBtn.disabled = false;
    }
  }

  // -- decisions -----------------------------------------------------------

  private decisionPanel(history: DecisionDoc[]): HTMLElement {
    const verdict = el("select", { id: "verdict-select" });
    for (const v of ["genuine", "imposter", "unsure"]) {
      verdict.append(el("option", { value: v }, [v]));
    }
    const operator = el("input", {
      id: "operator-input",
      type: "text",
      placeholder: "operator",
    });
    const note = el("textarea", { id: "note-input", placeholder: "note" });
    const post = el("button", { id: "decision-post", type: "button" }, [
      "record decision",
    ]);
    post.addEventListener("click", () => {
      this.lastOp = this.postDecision(
        verdict.value as Verdict,
        operator.value,
        note.value,
      );
    });

    return el("section", { id: "decisions" }, [
      el("h3", {}, ["decision"]),
      verdict,
      operator,
      note,
      post,
      el("div", { id: "decision-notice", class: "notice", hidden: "" }),
      this.historyList(history),
    ]);
  }

  private historyList(history: DecisionDoc[]): HTMLElement {
    const list = el("ol", { id: "decision-history" });
    for (const d of history) {
      list.append(
        el("li", { "data-verdict": d.verdict }, [
          `${d.created_at} — ${d.operator}: ${d.verdict}` +
            (d.note ? ` (${d.note})` : ""),
        ]),
      );
    }
    return list;
  }

  private async postDecision(
    verdict: Verdict,
    operator: string,
    note: string,
  ): Promise<void> {
    if (!this.record || this.decisionPending) return;
    this.decisionPending = true;
    try {
      await this.api.postDecision(
        this.record.pair_id,
        { verdict, operator, note },
        this.record.dataset,
        this.record.model,
      );
      const history = await this.api.decisions(
        this.record.pair_id,
        this.record.dataset,
      );
      const list = this.container.querySelector("#decision-history");
      if (list) list.replaceWith(this.historyList(history));
    } catch (exc) {
      const box = this.container.querySelector<HTMLElement>("#decision-notice");
      if (box) {
        box.textContent = exc instanceof Error ? exc.message : String(exc);
        box.removeAttribute("hidden");
      }
    } finally {
      this.decisionPending = false;
    }
  }
}
