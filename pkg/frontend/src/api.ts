/**
 * Typed client for the annotation service HTTP API.
 *
 * The service is the single source of truth: this module only moves JSON
 * and image bytes, it never derives orderings or stats on its own.
 */

export interface SessionStats {
  manual: number;
  implied: number;
  total: number;
  remaining: number;
  /** Mean chain savings; null until the session has a manual arc. */
  zeta_mean: number | null;
}

export interface PoolInfo {
  ids: string[];
  cap: number;
  seed: number;
}

export interface SessionOptions {
  pool?: string[];
  cap?: number;
  seed?: number;
}

export type Verdict = -1 | 0 | 1;

export interface PairProposal {
  i: string;
  j: string;
}

export type NextResponse = PairProposal | { done: true };

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Judgment rejected with 409: the reverse order is already implied. */
export class ConflictError extends Error {
  constructor(readonly witness: string[]) {
    super(`ordering already fixed by ${witness.join(" > ")}`);
    this.name = "ConflictError";
  }
}

const JSON_HEADERS = { "Content-Type": "application/json" };

export class AnnotationApi {
  constructor(readonly baseUrl: string = "") {}

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/images/${encodeURIComponent(imageId)}`;
  }

  exportUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/export`;
  }

  pool(): Promise<PoolInfo> {
    return this.request<PoolInfo>("/pool");
  }

  async createSession(options: SessionOptions = {}): Promise<string> {
    const body: Record<string, unknown> = {};
    if (options.pool !== undefined) body.pool = options.pool;
    if (options.cap !== undefined) body.cap = options.cap;
    if (options.seed !== undefined) body.seed = options.seed;
    const out = await this.request<{ session_id: string }>("/sessions", {
      method: "POST",
      headers: JSON_HEADERS,
      body: JSON.stringify(body),
    });
    return out.session_id;
  }

  nextPair(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  stats(sessionId: string): Promise<SessionStats> {
    return this.request<SessionStats>(`/sessions/${encodeURIComponent(sessionId)}/stats`);
  }

  async submitJudgment(sessionId: string, i: string, j: string, verdict: Verdict): Promise<SessionStats> {
    const resp = await this.fetch(`/sessions/${encodeURIComponent(sessionId)}/judgments`, {
      method: "POST",
      headers: JSON_HEADERS,
      body: JSON.stringify({ i, j, verdict }),
    });
    if (resp.status === 409) {
      const body = (await resp.json()) as { witness: string[] };
      throw new ConflictError(body.witness);
    }
    if (!resp.ok) throw await this.describeFailure(resp);
    const body = (await resp.json()) as { accepted: boolean; stats: SessionStats };
    return body.stats;
  }

  async fetchImage(imageId: string): Promise<ArrayBuffer> {
    const resp = await this.fetch(`/images/${encodeURIComponent(imageId)}`);
    if (!resp.ok) throw await this.describeFailure(resp);
    return resp.arrayBuffer();
  }

  private async fetch(path: string, init?: RequestInit): Promise<Response> {
    try {
      return await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetch(path, init);
    if (!resp.ok) throw await this.describeFailure(resp);
    return (await resp.json()) as T;
  }

  private async describeFailure(resp: Response): Promise<ApiError> {
    const detail = await resp.text().catch(() => "");
    return new ApiError(resp.status, detail || resp.statusText);
  }
}
