import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { StubServer } from "./stub.js";

function client(server: StubServer): ApiClient {
  return new ApiClient("", server.fetch);
}

describe("ApiClient", () => {
  it("lists systems", async () => {
    const server = new StubServer();
    const systems = await client(server).listSystems();
    expect(systems).toHaveLength(1);
    expect(systems[0]?.system_id).toBe("stub-sys");
    expect(server.requests).toEqual(["GET /api/systems"]);
  });

  it("creates a session and fetches it back", async () => {
    const server = new StubServer();
    const api = client(server);
    const session = await api.createSession("stub-sys", {
      items: [1, 2],
      sentences: ["i like scifi"],
    });
    expect(session.status).toBe("open");
    expect(session.turns).toEqual([]);
    const fetched = await api.getSession(session.session_id);
    expect(fetched).toEqual(session);
  });

  it("maps the error envelope to ApiError", async () => {
    const server = new StubServer();
    const api = client(server);
    const err = await api.createSession("nope", { items: [], sentences: [] })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
    expect((err as ApiError).body.code).toBe("unknown_system");
  });

  it("surfaces validation details", async () => {
    const server = new StubServer();
    const api = client(server);
    const err = await api.createSession("stub-sys", { items: [9999], sentences: [] })
      .catch((e: unknown) => e);
    expect((err as ApiError).body.details["unknown_items"]).toEqual([9999]);
  });

  it("sends messages and applies overrides", async () => {
    const server = new StubServer();
    const api = client(server);
    const session = await api.createSession("stub-sys", { items: [], sentences: [] });
    const turn = await api.sendMessage(session.session_id, "hello there");
    expect(turn.turn_id).toBe(1);
    expect(turn.recommendations).toHaveLength(5);
    expect(turn.response).toBeTruthy();
    const revised = await api.applyOverride(session.session_id, 1, "recommendations", [3, 1]);
    expect(revised.recommendations?.map((r) => r.item_id)).toEqual([3, 1]);
    expect(revised.overrides_applied).toEqual({ recommendations: [3, 1] });
  });

  it("closes sessions idempotently", async () => {
    const server = new StubServer();
    const api = client(server);
    const session = await api.createSession("stub-sys", { items: [], sentences: [] });
    const closed = await api.closeSession(session.session_id);
    expect(closed.status).toBe("closed");
    const again = await api.closeSession(session.session_id);
    expect(again.status).toBe("closed");
  });
});
