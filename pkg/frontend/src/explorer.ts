/** Explorer: a filterable, sortable, paginated table over `/api/pairs`.
 *
 * Pure presentation: every row comes verbatim from one API page; the
 * component never reorders, refilters, or recomputes what the server
 * returned. Sorting and filtering only change the next query.
 */

import type { ApiClient } from "./api.js";
import { clear, el, num } from "./dom.js";
import type { ViewState } from "./state.js";
import type { PairDoc, PairsQuery } from "./types.js";

export interface ExplorerCallbacks {
  onOpenPair(pair: PairDoc): void;
  onStateChange(state: ViewState): void;
  onError(message: string, retry: () => void): void;
}

const COLUMNS: { key: string; title: string; sort?: "pair_id" | "distance" | "c" }[] = [
  { key: "pair_id", title: "pair", sort: "pair_id" },
  { key: "label", title: "label" },
  { key: "prediction", title: "prediction" },
  { key: "correct", title: "correct" },
  { key: "d_orig", title: "distance", sort: "distance" },
  { key: "c_score", title: "C", sort: "c" },
  { key: "model", title: "model" },
];

export function pairsQueryFrom(state: ViewState): PairsQuery {
  return {
    dataset: state.dataset,
    model: state.model,
    label: state.label,
    prediction: state.prediction,
    correct: state.correct,
    c_min: state.c_min,
    c_max: state.c_max,
    sort: state.sort,
    order: state.order,
    page: state.page,
    per_page: state.per_page,
  };
}

export class Explorer {
  /** Resolves when the most recent load/refresh settles (for tests). */
  lastLoad: Promise<void> = Promise.resolve();

  private state: ViewState;
  /** Monotone fetch counter; stale responses are dropped, never rendered. */
  private loadSeq = 0;

  constructor(
    private readonly container: HTMLElement,
    private readonly api: ApiClient,
    private readonly callbacks: ExplorerCallbacks,
    initial: ViewState,
  ) {
    this.state = { ...initial };
  }

  load(state: ViewState): Promise<void> {
    this.state = { ...state };
    this.lastLoad = this.refresh();
    return this.lastLoad;
  }

  private update(changes: Partial<ViewState>): void {
    this.state = { ...this.state, ...changes };
    this.callbacks.onStateChange(this.state);
    this.lastLoad = this.refresh();
  }

  private async refresh(): Promise<void> {
    const seq = ++this.loadSeq;
    let pageDoc;
    try {
      pageDoc = await this.api.listPairs(pairsQueryFrom(this.state));
    } catch (exc) {
      if (seq !== this.loadSeq) return;
      this.callbacks.onError(
        exc instanceof Error ? exc.message : String(exc),
        () => void this.load(this.state),
      );
      return;
    }
    if (seq !== this.loadSeq) return; // a newer query superseded this one
    this.render(pageDoc.items, pageDoc.total);
  }

  private render(items: PairDoc[], total: number): void {
    clear(this.container);
    this.container.append(this.filterBar(), this.table(items), this.pager(total));
  }

  private filterBar(): HTMLElement {
    const labelSel = this.select(
      "filter-label",
      ["", "genuine", "imposter", "unknown"],
      this.state.label ?? "",
    );
    labelSel.addEventListener("change", () => {
      this.update({
        label: (labelSel.value || undefined) as ViewState["label"],
        page: 1,
      });
    });

    const predSel = this.select(
      "filter-prediction",
      ["", "genuine", "imposter"],
      this.state.prediction ?? "",
    );
    predSel.addEventListener("change", () => {
      this.update({
        prediction: (predSel.value || undefined) as ViewState["prediction"],
        page: 1,
      });
    });

    const correctSel = this.select(
      "filter-correct",
      ["", "correct", "wrong"],
      this.state.correct ?? "",
    );
    correctSel.addEventListener("change", () => {
      this.update({
        correct: (correctSel.value || undefined) as ViewState["correct"],
        page: 1,
      });
    });

    const cMin = el("input", {
      id: "filter-c-min",
      type: "number",
      step: "0.05",
      min: "0",
      max: "1",
      placeholder: "C min",
      value: this.state.c_min !== undefined ? String(this.state.c_min) : "",
    });
    const cMax = el("input", {
      id: "filter-c-max",
      type: "number",
      step: "0.05",
      min: "0",
      max: "1",
      placeholder: "C max",
      value: this.state.c_max !== undefined ? String(this.state.c_max) : "",
    });
    const apply = el("button", { id: "filter-apply", type: "button" }, ["apply"]);
    apply.addEventListener("click", () => {
      this.update({
        c_min: cMin.value === "" ? undefined : Number(cMin.value),
        c_max: cMax.value === "" ? undefined : Number(cMax.value),
        page: 1,
      });
    });

    return el("div", { class: "filter-bar" }, [
      this.labeled("label", labelSel),
      this.labeled("prediction", predSel),
      this.labeled("correct", correctSel),
      cMin,
      cMax,
      apply,
    ]);
  }

  private labeled(text: string, control: HTMLElement): HTMLElement {
    return el("label", { class: "filter" }, [text + " ", control]);
  }

  private select(id: string, options: string[], value: string): HTMLSelectElement {
    const sel = el("select", { id });
    for (const opt of options) {
      sel.append(el("option", { value: opt }, [opt === "" ? "all" : opt]));
    }
    sel.value = value;
    return sel;
  }

  private table(items: PairDoc[]): HTMLElement {
    const headRow = el("tr");
    for (const col of COLUMNS) {
      const th = el("th", { "data-col": col.key }, [col.title]);
      if (col.sort) {
        th.classList.add("sortable");
        if (this.state.sort === col.sort) {
          th.classList.add(this.state.order === "asc" ? "sorted-asc" : "sorted-desc");
        }
        const target = col.sort;
        th.addEventListener("click", () => {
          const order =
            this.state.sort === target && this.state.order === "asc" ? "desc" : "asc";
          this.update({ sort: target, order, page: 1 });
        });
      }
      headRow.append(th);
    }

    const body = el("tbody");
    for (const item of items) {
      const badge =
        item.correct === null ? "unknown" : item.correct ? "correct" : "wrong";
      const row = el("tr", { "data-pair-id": item.pair_id, class: "pair-row" }, [
        el("td", {}, [item.pair_id]),
        el("td", {}, [item.label]),
        el("td", {}, [item.prediction ?? "—"]),
        el("td", { class: `badge badge-${badge}` }, [
          badge === "unknown" ? "—" : badge,
        ]),
        el("td", {}, [num(item.d_orig, 4)]),
        el("td", {}, [num(item.c_score, 3)]),
        el("td", {}, [item.model]),
      ]);
      row.addEventListener("click", () => this.callbacks.onOpenPair(item));
      body.append(row);
    }

    return el("table", { id: "explorer-table" }, [el("thead", {}, [headRow]), body]);
  }

  private pager(total: number): HTMLElement {
    const pages = Math.max(1, Math.ceil(total / this.state.per_page));
    const info = el("span", { id: "page-info" }, [
      `page ${this.state.page} of ${pages} (${total} records)`,
    ]);
    const prev = el("button", { id: "page-prev", type: "button" }, ["prev"]);
    const next = el("button", { id: "page-next", type: "button" }, ["next"]);
    if (this.state.page <= 1) prev.setAttribute("disabled", "");
    if (this.state.page >= pages) next.setAttribute("disabled", "");
    prev.addEventListener("click", () => this.update({ page: this.state.page - 1 }));
    next.addEventListener("click", () => this.update({ page: this.state.page + 1 }));
    return el("div", { class: "pager" }, [prev, info, next]);
  }
}
