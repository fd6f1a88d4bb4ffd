// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController } from "../src/controller.js";
import { mountApp, parseItems, parseOverrideValue } from "../src/main.js";
import { renderApp } from "../src/render.js";
import { StubServer } from "./stub.js";

function setup(): { server: StubServer; controller: ChatController; root: HTMLElement } {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const server = new StubServer();
  const controller = new ChatController(new ApiClient("", server.fetch));
  mountApp(root, controller);
  return { server, controller, root };
}

async function startChat(controller: ChatController): Promise<void> {
  await controller.loadSystems();
  controller.selectSystem("stub-sys");
  await controller.startSession({ items: [0, 1], sentences: ["i like scifi"] });
}

async function sendViaDom(root: HTMLElement, controller: ChatController, text: string) {
  const draft = root.querySelector<HTMLTextAreaElement>("#draft")!;
  draft.value = text;
  draft.dispatchEvent(new Event("input", { bubbles: true }));
  root.querySelector<HTMLButtonElement>("#send")!.click();
  await vi.waitFor(() => {
    if (controller.state.phase !== "idle" && controller.state.phase !== "error") {
      throw new Error("still sending");
    }
  });
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("profile form", () => {
  it("disables submit until a system is chosen", async () => {
    const { controller, root } = setup();
    await controller.loadSystems();
    expect(root.querySelector<HTMLButtonElement>("#start-session")!.disabled).toBe(true);
    const select = root.querySelector<HTMLSelectElement>("#system-select")!;
    select.value = "stub-sys";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    expect(root.querySelector<HTMLButtonElement>("#start-session")!.disabled).toBe(false);
  });

  it("renders unknown-item validation errors inline, naming the id", async () => {
    const { controller, root } = setup();
    await controller.loadSystems();
    controller.selectSystem("stub-sys");
    root.querySelector<HTMLInputElement>("#profile-items")!.value = "9999";
    root.querySelector<HTMLFormElement>("#profile-form")!.dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await vi.waitFor(() => {
      expect(root.querySelector("#form-errors")!.textContent).toContain("9999");
    });
    expect(root.querySelector("#profile-form")).not.toBeNull(); // still on the form
  });

  it("moves to the chat view on success", async () => {
    const { controller, root } = setup();
    await startChat(controller);
    expect(root.querySelector(".chat-view")).not.toBeNull();
    expect(root.querySelectorAll(".bubble")).toHaveLength(0);
  });
});

describe("transcript and inspector", () => {
  it("one message yields two bubbles and one inspector entry", async () => {
    const { controller, root } = setup();
    await startChat(controller);
    await sendViaDom(root, controller, "hello there");
    expect(root.querySelectorAll(".bubble")).toHaveLength(2);
    expect(root.querySelectorAll(".inspector-entry")).toHaveLength(1);
    const entry = root.querySelector(".inspector-entry")!;
    expect(entry.querySelector(".policy-label")!.textContent).toContain("policy:");
    expect(entry.querySelectorAll(".recs li")).toHaveLength(5);
    expect(entry.querySelector(".recs .score")).not.toBeNull();
  });

  it("re-fetching and re-rendering reproduces the incrementally built DOM", async () => {
    const { controller, root } = setup();
    await startChat(controller);
    await sendViaDom(root, controller, "hello there");
    await sendViaDom(root, controller, "anything scarier maybe");
    await controller.applyOverride(2, "recommendations", [3, 1]);
    const incremental = root.innerHTML;

    await controller.refetch(); // re-render from the server's authoritative state
    expect(root.innerHTML).toBe(incremental);

    const fresh = renderApp(controller.state);
    document.body.innerHTML = '<div id="other"></div>';
    const other = document.getElementById("other") as HTMLElement;
    other.innerHTML = fresh;
    expect(other.querySelector("#transcript")!.innerHTML).toBe(
      new DOMParser()
        .parseFromString(`<div>${incremental}</div>`, "text/html")
        .querySelector("#transcript")!.innerHTML,
    );
  });

  it("no client-side recommendation content: everything shown came from the server", async () => {
    const { server, controller, root } = setup();
    await startChat(controller);
    await sendViaDom(root, controller, "hello there");
    const serverTurn = server.sessions.values().next().value!.turns[0]!;
    for (const rec of serverTurn.recommendations ?? []) {
      expect(root.querySelector("#inspector")!.textContent).toContain(rec.name);
    }
    expect(root.querySelector(".bubble.system")!.textContent).toContain(
      serverTurn.response ?? "",
    );
  });
});

describe("override controls", () => {
  it("replacing the recommendation list re-renders the revised turn with a badge", async () => {
    const { controller, root } = setup();
    await startChat(controller);
    await sendViaDom(root, controller, "hello there");
    const responseBefore = root.querySelector(".bubble.system")!.textContent;

    const controls = root.querySelector<HTMLElement>(".override-controls")!;
    controls.querySelector<HTMLSelectElement>(".override-field")!.value = "recommendations";
    controls.querySelector<HTMLInputElement>(".override-value")!.value = "3, 1";
    controls.querySelector<HTMLButtonElement>(".override-apply")!.click();
    await vi.waitFor(() => {
      expect(root.querySelector(".override-badge")).not.toBeNull();
    });
    expect(root.querySelector(".override-badge")!.textContent).toContain("recommendations");
    expect(root.querySelector(".bubble.system")!.textContent).not.toBe(responseBefore);
    expect(root.querySelector(".recs li")!.getAttribute("data-item-id")).toBe("3");
  });

  it("identical-value override shows the badge but leaves the text unchanged", async () => {
    const { server, controller, root } = setup();
    await startChat(controller);
    await sendViaDom(root, controller, "hello there");
    const turn = server.sessions.values().next().value!.turns[0]!;
    const sameItems = (turn.recommendations ?? []).map((r) => r.item_id);
    const responseBefore = root.querySelector(".bubble.system")!.textContent;

    await controller.applyOverride(1, "recommendations", sameItems);
    expect(root.querySelector(".override-badge")).not.toBeNull();
    const badgeText = root.querySelector(".bubble.system .override-badge")!.textContent!;
    const responseAfter = root
      .querySelector(".bubble.system")!
      .textContent!.replace(badgeText, "");
    expect(responseAfter).toBe(responseBefore);
  });

  it("controls on older turns are disabled with an explanation", async () => {
    const { controller, root } = setup();
    await startChat(controller);
    await sendViaDom(root, controller, "first message");
    await sendViaDom(root, controller, "second message");
    const controls = root.querySelectorAll<HTMLElement>(".override-controls");
    expect(controls).toHaveLength(2);
    expect(controls[0]!.classList.contains("disabled")).toBe(true);
    expect(controls[0]!.textContent).toContain("only the latest turn");
    expect(controls[0]!.querySelector<HTMLButtonElement>(".override-apply")!.disabled).toBe(true);
    expect(controls[1]!.classList.contains("disabled")).toBe(false);
  });
});

describe("failure handling", () => {
  it("a server error shows the retry banner and preserves the draft", async () => {
    const { server, controller, root } = setup();
    await startChat(controller);
    server.failNext(1);
    await sendViaDom(root, controller, "precious words");
    expect(root.querySelector(".retry-banner")).not.toBeNull();
    expect(root.querySelector<HTMLTextAreaElement>("#draft")!.value).toBe("precious words");
    expect(root.querySelectorAll(".bubble")).toHaveLength(0);

    root.querySelector<HTMLButtonElement>("#retry-send")!.click();
    await vi.waitFor(() => {
      expect(root.querySelectorAll(".bubble")).toHaveLength(2);
    });
    expect(root.querySelector(".retry-banner")).toBeNull();
    expect(root.querySelector<HTMLTextAreaElement>("#draft")!.value).toBe("");
  });
});

describe("input parsing", () => {
  it("parses item id lists", () => {
    expect(parseItems(" 3, 14,x, 5 ")).toEqual([3, 14, 5]);
    expect(parseItems("")).toEqual([]);
  });

  it("parses override values per field", () => {
    expect(parseOverrideValue("recommendations", "4, 2")).toEqual([4, 2]);
    expect(parseOverrideValue("policy", "chat")).toBe("chat");
    expect(parseOverrideValue("policy", "2")).toBe(2);
  });
});
