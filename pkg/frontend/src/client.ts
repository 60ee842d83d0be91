/**
 * Thin HTTP client for the annotation service. All communication with the
 * backend goes through this module; there is no other channel.
 */

import type {
  AnnotationPayload,
  CreateSessionResponse,
  NextBatchResponse,
  SessionStateResponse,
  SubmitResponse,
} from "./types.js";

export interface CreateSessionRequest {
  collection: string;
  config: Record<string, unknown>;
  seed_labels?: Record<string, number>;
  annotators_per_doc?: number;
  label_source?: "final" | "inferred";
  session_id?: string;
}

/** 409 from the service: someone else completed the batch, or a duplicate. */
export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ConflictError";
  }
}

/** Any non-2xx other than 409. */
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ServiceError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async createSession(req: CreateSessionRequest): Promise<CreateSessionResponse> {
    return this.request("POST", "/sessions", req);
  }

  async nextBatch(sessionId: string, worker: string): Promise<NextBatchResponse> {
    const q = encodeURIComponent(worker);
    return this.request("GET", `/sessions/${sessionId}/next?worker=${q}`);
  }

  async submitAnnotation(
    sessionId: string,
    payload: AnnotationPayload,
  ): Promise<SubmitResponse> {
    return this.request("POST", `/sessions/${sessionId}/annotations`, payload);
  }

  async sessionState(sessionId: string): Promise<SessionStateResponse> {
    return this.request("GET", `/sessions/${sessionId}/state`);
  }

  /** NDJSON export, one JSON object per line. */
  async exportSession(sessionId: string): Promise<string> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/export`);
    if (!resp.ok) throw await this.toError(resp);
    return resp.text();
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) throw await this.toError(resp);
    return (await resp.json()) as T;
  }

  private async toError(resp: Response): Promise<Error> {
    let detail = `${resp.status}`;
    try {
      const data = (await resp.json()) as { detail?: string };
      if (data.detail) detail = data.detail;
    } catch {
      // non-JSON error body; keep the status code
    }
    return resp.status === 409
      ? new ConflictError(detail)
      : new ServiceError(resp.status, detail);
  }
}
