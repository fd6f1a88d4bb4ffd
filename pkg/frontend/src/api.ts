/** Typed fetch wrapper over the interaction-service API.
 *
 * The fetch implementation is injectable so tests can run against a
 * stubbed server; everything else is a thin, faithful mapping of the
 * documented routes.
 */

import type {
  ApiErrorBody,
  OverrideField,
  Profile,
  Session,
  SystemInfo,
  Turn,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(body.message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      ...init,
      headers: { "content-type": "application/json", ...(init?.headers ?? {}) },
    });
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      const body = (payload["error"] ?? {
        code: "unknown",
        message: `HTTP ${response.status}`,
        details: {},
      }) as ApiErrorBody;
      throw new ApiError(response.status, body);
    }
    return payload as T;
  }

  async listSystems(): Promise<SystemInfo[]> {
    const data = await this.request<{ systems: SystemInfo[] }>("/api/systems");
    return data.systems;
  }

  async createSession(systemId: string, profile: Profile): Promise<Session> {
    const data = await this.request<{ session: Session }>("/api/sessions", {
      method: "POST",
      body: JSON.stringify({ system_id: systemId, profile }),
    });
    return data.session;
  }

  async getSession(sessionId: string): Promise<Session> {
    const data = await this.request<{ session: Session }>(
      `/api/sessions/${sessionId}`,
    );
    return data.session;
  }

  async closeSession(sessionId: string): Promise<Session> {
    const data = await this.request<{ session: Session }>(
      `/api/sessions/${sessionId}`,
      { method: "DELETE" },
    );
    return data.session;
  }

  async sendMessage(sessionId: string, text: string): Promise<Turn> {
    const data = await this.request<{ turn: Turn }>(
      `/api/sessions/${sessionId}/messages`,
      { method: "POST", body: JSON.stringify({ text }) },
    );
    return data.turn;
  }

  async applyOverride(
    sessionId: string,
    turnId: number,
    field: OverrideField,
    value: unknown,
  ): Promise<Turn> {
    const data = await this.request<{ turn: Turn }>(
      `/api/sessions/${sessionId}/override`,
      { method: "POST", body: JSON.stringify({ turn_id: turnId, field, value }) },
    );
    return data.turn;
  }
}
