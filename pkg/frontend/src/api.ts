// Gateway client. The transport is injectable so tests can record exactly
// which calls a view issues.

import type {
  Aggregate,
  CompareReport,
  EventsResponse,
  Leaderboard,
  NodesResponse,
  SessionInfo,
  SessionsResponse,
  SessionTelemetry,
  Status,
} from "./types.js";

export interface HttpReply {
  status: number;
  body: string;
}

export type Transport = (
  method: string,
  url: string,
  headers: Record<string, string>,
  body?: string,
) => Promise<HttpReply>;

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(`[${status}] ${code}: ${message}`);
  }
}

export const fetchTransport: Transport = async (method, url, headers, body) => {
  const resp = await fetch(url, { method, headers, body });
  return { status: resp.status, body: await resp.text() };
};

export class Api {
  constructor(
    private base: string,
    private token: string,
    private transport: Transport = fetchTransport,
  ) {}

  private async req<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
    };
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const reply = await this.transport(method, this.base + path, headers, payload);
    let parsed: unknown = null;
    try {
      parsed = JSON.parse(reply.body);
    } catch {
      parsed = null;
    }
    if (reply.status >= 400) {
      const err = (parsed as { error?: { code: string; message: string } })?.error;
      throw new ApiError(reply.status, err?.code ?? "http",
        err?.message ?? reply.body);
    }
    return parsed as T;
  }

  listSessions(): Promise<SessionsResponse> {
    return this.req("GET", "/v1/sessions");
  }

  compare(ids: string[]): Promise<CompareReport> {
    return this.req("GET", `/v1/sessions/compare?ids=${encodeURIComponent(ids.join(","))}`);
  }

  events(sessionId: string): Promise<EventsResponse> {
    return this.req("GET", `/v1/sessions/${sessionId}/events`);
  }

  leaderboard(dataset: string): Promise<Leaderboard> {
    return this.req("GET", `/v1/leaderboard/${dataset}`);
  }

  aggregate(fromMs: number, toMs: number): Promise<Aggregate> {
    return this.req("GET", `/v1/telemetry/aggregate?window=${fromMs}:${toMs}`);
  }

  nodes(): Promise<NodesResponse> {
    return this.req("GET", "/v1/telemetry/nodes");
  }

  sessionTelemetry(sessionId: string): Promise<SessionTelemetry> {
    return this.req("GET", `/v1/sessions/${sessionId}/telemetry`);
  }

  status(): Promise<Status> {
    return this.req("GET", "/v1/status");
  }

  // mutations: exactly the endpoints the CLI uses
  stopSession(sessionId: string): Promise<{ session_id: string; state: string }> {
    return this.req("POST", `/v1/sessions/${sessionId}/stop`, {});
  }

  forkSession(
    sessionId: string,
    overrides: Record<string, unknown>,
  ): Promise<{ session_id: string; session: SessionInfo }> {
    return this.req("POST", `/v1/sessions/${sessionId}/fork`, { overrides });
  }

  rmSession(sessionId: string): Promise<{ session_id: string; removed: boolean }> {
    return this.req("POST", `/v1/sessions/${sessionId}/rm`, {});
  }

  resumeSession(sessionId: string): Promise<{ session_id: string; state: string }> {
    return this.req("POST", `/v1/sessions/${sessionId}/resume`, {});
  }
}
