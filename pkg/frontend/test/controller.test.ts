import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController } from "../src/controller.js";
import { StubServer } from "./stub.js";

async function started(server: StubServer): Promise<ChatController> {
  const controller = new ChatController(new ApiClient("", server.fetch));
  await controller.loadSystems();
  controller.selectSystem("stub-sys");
  await controller.startSession({ items: [0], sentences: [] });
  return controller;
}

describe("ChatController", () => {
  it("requires a system before starting", async () => {
    const controller = new ChatController(new ApiClient("", new StubServer().fetch));
    await controller.startSession({ items: [], sentences: [] });
    expect(controller.state.session).toBeNull();
    expect(controller.state.formErrors).toHaveLength(1);
  });

  it("renders server validation errors inline", async () => {
    const server = new StubServer();
    const controller = new ChatController(new ApiClient("", server.fetch));
    await controller.loadSystems();
    controller.selectSystem("stub-sys");
    await controller.startSession({ items: [9999], sentences: [] });
    expect(controller.state.session).toBeNull();
    expect(controller.state.formErrors[0]).toContain("9999");
  });

  it("sends a message and mirrors the server turn", async () => {
    const server = new StubServer();
    const controller = await started(server);
    controller.setDraft("hello");
    await controller.send();
    expect(controller.state.phase).toBe("idle");
    expect(controller.state.draft).toBe("");
    expect(controller.state.session?.turns).toHaveLength(1);
    const serverTurns = server.sessions.get(
      controller.state.session?.session_id ?? "",
    )?.turns;
    expect(controller.state.session?.turns).toEqual(serverTurns);
  });

  it("queues a second send until the first resolves", async () => {
    const server = new StubServer();
    const controller = await started(server);
    controller.setDraft("first message");
    const one = controller.send();
    controller.setDraft("second message");
    const two = controller.send();
    await Promise.all([one, two]);
    // The queued message is delivered by the first send's chain; wait for it.
    await new Promise((resolve) => setTimeout(resolve, 0));
    const turns = controller.state.session?.turns ?? [];
    expect(turns.map((t) => t.user_text)).toEqual(["first message", "second message"]);
    const posts = server.requests.filter((r) => r.includes("/messages"));
    expect(posts).toHaveLength(2);
  });

  it("keeps the draft and enters error phase on server failure", async () => {
    const server = new StubServer();
    const controller = await started(server);
    server.failNext(1);
    controller.setDraft("precious words");
    await controller.send();
    expect(controller.state.phase).toBe("error");
    expect(controller.state.draft).toBe("precious words");
    expect(controller.state.failedText).toBe("precious words");
    expect(controller.state.session?.turns).toHaveLength(0);

    await controller.retry();
    expect(controller.state.phase).toBe("idle");
    expect(controller.state.session?.turns.map((t) => t.user_text)).toEqual([
      "precious words",
    ]);
  });

  it("rejects overrides on non-latest turns locally", async () => {
    const server = new StubServer();
    const controller = await started(server);
    controller.setDraft("one");
    await controller.send();
    controller.setDraft("two");
    await controller.send();
    const before = server.requests.length;
    await controller.applyOverride(1, "recommendations", [1]);
    expect(server.requests).toHaveLength(before); // never reached the server
    expect(controller.state.error).toContain("latest");
  });

  it("applies an override and swaps in the revised turn", async () => {
    const server = new StubServer();
    const controller = await started(server);
    controller.setDraft("hello");
    await controller.send();
    await controller.applyOverride(1, "recommendations", [4, 2]);
    const turn = controller.latestTurn();
    expect(turn?.overrides_applied).toEqual({ recommendations: [4, 2] });
    expect(turn?.recommendations?.map((r) => r.item_id)).toEqual([4, 2]);
    expect(turn?.response).toContain("item-4"); // downstream re-ran
  });

  it("refetch replaces the mirror with server state", async () => {
    const server = new StubServer();
    const controller = await started(server);
    controller.setDraft("hello");
    await controller.send();
    const sid = controller.state.session?.session_id ?? "";
    // Mutate the mirror to simulate drift, then resync.
    controller.state.session!.turns = [];
    await controller.refetch();
    expect(controller.state.session?.turns).toHaveLength(1);
    expect(controller.state.session?.turns).toEqual(server.sessions.get(sid)?.turns);
  });
});
