/**
 * DOM rendering for the annotation page.
 *
 * The page skeleton lives in index.html; this module only fills it in from
 * controller state and paints image pixels onto the canvases.
 */

import type { AnnotationApi } from "./api.js";
import { decodePgm, paintGray, type GrayImage } from "./pgm.js";
import type { ViewState } from "./state.js";

const STATUS_TEXT: Record<string, string> = {
  idle: "starting",
  loading: "contacting service",
  pair: "which shows more people?",
  done: "all pairs decided",
  error: "request failed",
};

function grab<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (el === null) throw new Error(`page skeleton is missing #${id}`);
  return el as T;
}

export class AnnotationView {
  private readonly status: HTMLElement;
  private readonly pairPanel: HTMLElement;
  private readonly leftCanvas: HTMLCanvasElement;
  private readonly rightCanvas: HTMLCanvasElement;
  private readonly leftLabel: HTMLElement;
  private readonly rightLabel: HTMLElement;
  private readonly buttons: HTMLButtonElement[];
  private readonly conflictBanner: HTMLElement;
  private readonly witnessChain: HTMLElement;
  private readonly donePanel: HTMLElement;
  private readonly exportLink: HTMLAnchorElement;
  private readonly errorBanner: HTMLElement;
  private readonly errorMessage: HTMLElement;
  private readonly statFields: Record<string, HTMLElement>;
  private readonly images = new Map<string, Promise<GrayImage>>();

  constructor(
    private readonly doc: Document,
    private readonly api: AnnotationApi,
  ) {
    this.status = grab(doc, "status-line");
    this.pairPanel = grab(doc, "pair-panel");
    this.leftCanvas = grab<HTMLCanvasElement>(doc, "left-canvas");
    this.rightCanvas = grab<HTMLCanvasElement>(doc, "right-canvas");
    this.leftLabel = grab(doc, "left-label");
    this.rightLabel = grab(doc, "right-label");
    this.buttons = ["btn-left", "btn-skip", "btn-right"].map((id) => grab<HTMLButtonElement>(doc, id));
    this.conflictBanner = grab(doc, "conflict-banner");
    this.witnessChain = grab(doc, "witness-chain");
    this.donePanel = grab(doc, "done-panel");
    this.exportLink = grab<HTMLAnchorElement>(doc, "export-link");
    this.errorBanner = grab(doc, "error-banner");
    this.errorMessage = grab(doc, "error-message");
    this.statFields = {
      manual: grab(doc, "stat-manual"),
      implied: grab(doc, "stat-implied"),
      total: grab(doc, "stat-total"),
      remaining: grab(doc, "stat-remaining"),
      zeta: grab(doc, "stat-zeta"),
    };
  }

  update(state: ViewState): void {
    const session = state.sessionId === null ? "" : `session ${state.sessionId} · `;
    this.status.textContent = session + (STATUS_TEXT[state.phase] ?? state.phase);

    this.pairPanel.hidden = state.pair === null;
    for (const button of this.buttons) button.disabled = state.phase !== "pair";
    if (state.pair !== null) {
      this.leftLabel.textContent = state.pair.i;
      this.rightLabel.textContent = state.pair.j;
      void this.paint(this.leftCanvas, state.pair.i);
      void this.paint(this.rightCanvas, state.pair.j);
    }

    this.conflictBanner.hidden = state.witness === null;
    if (state.witness !== null) this.renderWitness(state.witness);

    this.donePanel.hidden = state.phase !== "done";
    if (state.phase === "done" && state.sessionId !== null) {
      this.exportLink.href = this.api.exportUrl(state.sessionId);
    }

    this.errorBanner.hidden = state.phase !== "error";
    if (state.error !== null) this.errorMessage.textContent = state.error;

    const stats = state.stats;
    this.statFields.manual.textContent = stats === null ? "–" : String(stats.manual);
    this.statFields.implied.textContent = stats === null ? "–" : String(stats.implied);
    this.statFields.total.textContent = stats === null ? "–" : String(stats.total);
    this.statFields.remaining.textContent = stats === null ? "–" : String(stats.remaining);
    this.statFields.zeta.textContent =
      stats === null || stats.zeta_mean === null ? "–" : stats.zeta_mean.toFixed(3);
  }

  private renderWitness(witness: string[]): void {
    while (this.witnessChain.firstChild) this.witnessChain.removeChild(this.witnessChain.firstChild);
    for (const imageId of witness) {
      const figure = this.doc.createElement("figure");
      figure.className = "thumb";
      const canvas = this.doc.createElement("canvas");
      const caption = this.doc.createElement("figcaption");
      caption.textContent = imageId;
      figure.appendChild(canvas);
      figure.appendChild(caption);
      this.witnessChain.appendChild(figure);
      void this.paint(canvas, imageId);
    }
  }

  private async paint(canvas: HTMLCanvasElement, imageId: string): Promise<void> {
    canvas.dataset.imageId = imageId;
    canvas.dataset.state = "loading";
    try {
      const image = await this.load(imageId);
      if (canvas.dataset.imageId !== imageId) return; // a newer pair took the canvas
      canvas.dataset.state = paintGray(canvas, image) ? "painted" : "decoded";
    } catch {
      if (canvas.dataset.imageId === imageId) canvas.dataset.state = "failed";
    }
  }

  private load(imageId: string): Promise<GrayImage> {
    let pending = this.images.get(imageId);
    if (pending === undefined) {
      pending = this.api.fetchImage(imageId).then(decodePgm);
      pending.catch(() => this.images.delete(imageId)); // allow a retry after failures
      this.images.set(imageId, pending);
    }
    return pending;
  }
}
