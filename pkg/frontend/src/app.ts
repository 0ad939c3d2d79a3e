/** Composition root: wires the explorer and viewer to the browser URL.
 *
 * All view state (filters, sort, page, open pair, overlay, method) lives
 * in the query string, so any screen can be bookmarked or reloaded.
 */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { Explorer } from "./explorer.js";
import { encodeState, parseState, type ViewState } from "./state.js";
import type { PairDoc } from "./types.js";
import { Viewer } from "./viewer.js";

export class App {
  private readonly banner: HTMLElement;
  private readonly explorerHost: HTMLElement;
  private readonly viewerHost: HTMLElement;
  private readonly explorer: Explorer;
  private readonly viewer: Viewer;
  private state: ViewState;

  constructor(
    private readonly root: HTMLElement,
    api: ApiClient,
    private readonly win: Window = window,
  ) {
    this.state = parseState(win.location.search);

    this.banner = el("div", { id: "error-banner", class: "banner", hidden: "" });
    this.explorerHost = el("div", { id: "explorer-host" });
    this.viewerHost = el("div", { id: "viewer-host", hidden: "" });
    clear(root);
    root.append(
      el("header", {}, [el("h1", {}, ["xverify results"])]),
      this.banner,
      this.explorerHost,
      this.viewerHost,
    );

    this.explorer = new Explorer(this.explorerHost, api, {
      onOpenPair: (pair) => this.openPair(pair),
      onStateChange: (s) => this.pushState(s),
      onError: (message, retry) => this.showError(message, retry),
    }, this.state);

    this.viewer = new Viewer(this.viewerHost, api, {
      onStateChange: (s) => this.pushState(s),
      onBack: () => this.closePair(),
      onError: (message, retry) => this.showError(message, retry),
    }, this.state);

    this.win.addEventListener("popstate", () => {
      this.state = parseState(this.win.location.search);
      void this.show();
    });
  }

  /** Render whichever view the current state names. */
  show(): Promise<void> {
    this.hideError();
    if (this.state.view === "viewer" && this.state.pair) {
      this.explorerHost.setAttribute("hidden", "");
      this.viewerHost.removeAttribute("hidden");
      return this.viewer.open(this.state);
    }
    this.viewerHost.setAttribute("hidden", "");
    this.explorerHost.removeAttribute("hidden");
    return this.explorer.load(this.state);
  }

  private openPair(pair: PairDoc): void {
    this.state = {
      ...this.state,
      view: "viewer",
      pair: pair.pair_id,
      dataset: pair.dataset,
      model: pair.model,
    };
    this.win.history.pushState(null, "", encodeState(this.state) || "?");
    void this.show();
  }

  private closePair(): void {
    this.state = { ...this.state, view: "explorer", pair: undefined };
    this.win.history.pushState(null, "", encodeState(this.state) || "?");
    void this.show();
  }

  private pushState(state: ViewState): void {
    this.state = state;
    this.win.history.replaceState(null, "", encodeState(state) || "?");
  }

  private showError(message: string, retry: () => void): void {
    clear(this.banner);
    const button = el("button", { type: "button" }, ["retry"]);
    button.addEventListener("click", () => {
      this.hideError();
      retry();
    });
    this.banner.append(el("span", {}, [message]), button);
    this.banner.removeAttribute("hidden");
  }

  private hideError(): void {
    this.banner.setAttribute("hidden", "");
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const api = new ApiClient((input, init) => fetch(input, init));
  const app = new App(root, api);
  void app.show();
}

// only auto-boot in a real browser, not under the test runner
declare const process: unknown;
if (typeof process === "undefined") boot();
