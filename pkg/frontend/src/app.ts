/**
 * Page bootstrap: wires the API client, controller, view, and keyboard.
 *
 * Kept separate from the entry script so tests can boot against their own
 * document and service URL.
 */

import { AnnotationApi, type SessionOptions } from "./api.js";
import { AnnotationView } from "./render.js";
import { SessionController } from "./state.js";

export interface AppHandles {
  controller: SessionController;
  view: AnnotationView;
  /** Detach the document-level keyboard listener. */
  dispose(): void;
}

/** Session overrides from the query string: ?pool=a,b,c&cap=5&seed=2 */
export function optionsFromQuery(query: string): SessionOptions {
  const params = new URLSearchParams(query);
  const options: SessionOptions = {};
  const pool = params.get("pool");
  if (pool !== null && pool.length > 0) options.pool = pool.split(",");
  const cap = Number(params.get("cap"));
  if (Number.isInteger(cap) && cap > 0) options.cap = cap;
  const seed = Number(params.get("seed"));
  if (params.get("seed") !== null && Number.isInteger(seed)) options.seed = seed;
  return options;
}

export function bootApp(doc: Document, baseUrl = "", options: SessionOptions = {}): AppHandles {
  const api = new AnnotationApi(baseUrl);
  const view = new AnnotationView(doc, api);
  const controller = new SessionController(api, (state) => view.update(state));

  doc.getElementById("btn-left")?.addEventListener("click", () => void controller.judge(1));
  doc.getElementById("btn-right")?.addEventListener("click", () => void controller.judge(-1));
  doc.getElementById("btn-skip")?.addEventListener("click", () => void controller.judge(0));
  doc.getElementById("btn-retry")?.addEventListener("click", () => void controller.retry());

  const onKey = (event: KeyboardEvent): void => {
    if (event.repeat) return;
    switch (event.key) {
      case "ArrowLeft":
        event.preventDefault();
        void controller.judge(1);
        break;
      case "ArrowRight":
        event.preventDefault();
        void controller.judge(-1);
        break;
      case " ":
        event.preventDefault();
        void controller.judge(0);
        break;
    }
  };
  doc.addEventListener("keydown", onKey);

  void controller.start(options);
  return { controller, view, dispose: () => doc.removeEventListener("keydown", onKey) };
}
