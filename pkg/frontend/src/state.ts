/**
 * Session flow state machine.
 *
 * One request in flight at a time; the server is authoritative, so every
 * stats value shown comes from the most recent server response and the
 * client never computes orderings itself.  Failed operations keep the
 * current pair and stats on screen and can be retried as-is.
 */

import {
  AnnotationApi,
  ApiError,
  ConflictError,
  type PairProposal,
  type SessionOptions,
  type SessionStats,
  type Verdict,
} from "./api.js";

export type Phase = "idle" | "loading" | "pair" | "done" | "error";

export interface ViewState {
  phase: Phase;
  sessionId: string | null;
  pair: PairProposal | null;
  stats: SessionStats | null;
  /** Ordering proof for the most recently rejected judgment, newest first. */
  witness: string[] | null;
  error: string | null;
}

export type StateListener = (state: ViewState) => void;

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0 ? err.message : `service error ${err.status}: ${err.message}`;
  }
  return String(err);
}

export class SessionController {
  private state: ViewState = {
    phase: "idle",
    sessionId: null,
    pair: null,
    stats: null,
    witness: null,
    error: null,
  };
  private inflight = false;
  private recover: (() => Promise<void>) | null = null;

  constructor(
    private readonly api: AnnotationApi,
    private readonly listener: StateListener,
  ) {}

  snapshot(): ViewState {
    return { ...this.state };
  }

  /** Create a session and fetch the first proposal. */
  start(options: SessionOptions = {}): Promise<void> {
    return this.run(async () => {
      this.emit({ phase: "loading", error: null, witness: null });
      const sessionId = await this.api.createSession(options);
      const stats = await this.api.stats(sessionId);
      this.emit({ sessionId, stats });
      await this.advance();
    });
  }

  /** Judge the displayed pair: 1 left has more, -1 right has more, 0 can't tell. */
  judge(verdict: Verdict): Promise<void> {
    const { phase, pair } = this.state;
    if (phase !== "pair" || pair === null) return Promise.resolve();
    return this.run(() => this.submit(pair, verdict));
  }

  /** Re-run the operation that failed; no-op outside the error state. */
  retry(): Promise<void> {
    const op = this.recover;
    if (this.state.phase !== "error" || op === null) return Promise.resolve();
    return this.run(op);
  }

  private async submit(pair: PairProposal, verdict: Verdict): Promise<void> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) return;
    try {
      const stats = await this.api.submitJudgment(sessionId, pair.i, pair.j, verdict);
      this.emit({ stats, witness: null, error: null });
    } catch (err) {
      if (!(err instanceof ConflictError)) throw err;
      // rejected judgment: show the proof, nothing was recorded server-side
      this.emit({ witness: [...err.witness], error: null });
      this.emit({ stats: await this.api.stats(sessionId) });
    }
    await this.advance();
  }

  private async advance(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) return;
    const next = await this.api.nextPair(sessionId);
    if ("done" in next) {
      this.emit({ phase: "done", pair: null });
    } else {
      this.emit({ phase: "pair", pair: next });
    }
  }

  private async run(op: () => Promise<void>): Promise<void> {
    if (this.inflight) return;
    this.inflight = true;
    try {
      await op();
      this.recover = null;
    } catch (err) {
      this.recover = op;
      this.emit({ phase: "error", error: describeError(err) });
    } finally {
      this.inflight = false;
    }
  }

  private emit(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.listener(this.snapshot());
  }
}
